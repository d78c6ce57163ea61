use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn privgraph(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privgraph"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const CIRCLE: &str = r#"{"signature":{"p":2,"q":0},"variant":"shifted_circle","center_norm":0.5,"radius":0.3}"#;

#[test]
fn pipeline_from_sample_to_metric() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("latent.json"), CIRCLE).unwrap();
    ok(&privgraph(
        &["sample", "--latent", "latent.json", "--n", "300", "--rho", "0.9", "--seed", "3", "--latent-out", "x.csv", "--out", "a.txt"],
        d,
    ));
    assert!(fs::read_to_string(d.join("a.txt")).unwrap().starts_with("n 300\n"));
    ok(&privgraph(&["flip", "--in", "a.txt", "--eps", "3", "--seed", "4", "--out", "z.txt"], d));
    ok(&privgraph(&["pase", "--in", "z.txt", "--eps", "3", "--out", "pase.csv"], d));
    let header = fs::read_to_string(d.join("pase.csv")).unwrap();
    assert!(header.starts_with("dim=2,signs=++,rho_check="));

    let report = ok(&privgraph(&["metric", "--a", "pase.csv", "--b", "x.csv"], d));
    let value = |text: &str, key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line[key.len() + 1..].parse().unwrap()
    };
    let err = value(&report, "d2inf");
    assert!(err.is_finite() && err > 0.0 && err < 3.0, "{err}");
    assert!(value(&report, "frobenius_residual") >= err);
    assert!(report.contains("signature_a=2,0\n"));

    ok(&privgraph(&["pase", "--in", "z.txt", "--eps", "3", "--rescale", "--out", "rescaled.csv"], d));
    let x = fs::read_to_string(d.join("x.csv")).unwrap();
    let mu: f64 = x.lines().next().unwrap().rsplit("mu=").next().unwrap().parse().unwrap();
    let scaled: String = x
        .lines()
        .skip(1)
        .map(|l| {
            let row: Vec<String> = l.split(',').map(|v| (v.parse::<f64>().unwrap() / mu.sqrt()).to_string()).collect();
            row.join(",") + "\n"
        })
        .collect();
    fs::write(d.join("x_scaled.csv"), scaled).unwrap();
    let raw = ok(&privgraph(
        &["metric", "--a", "rescaled.csv", "--b", "x_scaled.csv", "--raw", "--sig", "2,0"],
        d,
    ));
    assert!((value(&raw, "d2inf") - err).abs() < 1e-6 * err.max(1.0));

    let h = ok(&privgraph(&["metric", "--a", "pase.csv", "--b", "x.csv", "--kind", "hausdorff"], d));
    let dh = value(&h, "hausdorff");
    assert!(dh.is_finite() && dh > 0.0);
}

#[test]
fn embed_equals_pase_without_privacy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("latent.json"), CIRCLE).unwrap();
    ok(&privgraph(&["sample", "--latent", "latent.json", "--n", "80", "--out", "a.txt"], d));
    ok(&privgraph(&["embed", "--graph", "a.txt", "--out", "ase.csv"], d));
    ok(&privgraph(&["pase", "--graph", "a.txt", "--eps", "inf", "--out", "pase.csv"], d));
    let body = |f: &str| fs::read_to_string(d.join(f)).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body("ase.csv"), body("pase.csv"));
}

#[test]
fn tda_and_cluster_on_two_groups() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let grid = |o: i32| (0..9).map(move |k| format!("{},{}\n", o + k % 3, o + k / 3));
    let pts: String = grid(0).chain(grid(50)).collect();
    fs::write(d.join("pts.csv"), pts).unwrap();
    let labels: String = (0..18).map(|i| format!("{}\n", i / 9)).collect();
    fs::write(d.join("truth.csv"), format!("label\n{labels}")).unwrap();
    let dgm = ok(&privgraph(&["tda", "--in", "pts.csv", "--max-dim", "0"], d));
    let lines: Vec<&str> = dgm.lines().collect();
    assert_eq!(lines[0], "dim,birth,death");
    assert_eq!(lines.len(), 19);
    assert!(lines.contains(&"0,0,inf"));

    fs::write(d.join("d1.csv"), "dim,birth,death\n1,0,2\n").unwrap();
    fs::write(d.join("d2.csv"), "dim,birth,death\n1,0.5,2.5\n").unwrap();
    let b = ok(&privgraph(&["tda", "--bottleneck", "d1.csv", "d2.csv", "--dim", "1"], d));
    assert_eq!(b.trim(), "0.5");

    let out = privgraph(&["cluster", "--in", "pts.csv", "--method", "kmeans", "--k", "2", "--truth", "truth.csv"], d);
    assert_eq!(ok(&out), format!("label\n{labels}"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ari 1"));
    let topo = ok(&privgraph(&["cluster", "--points", "pts.csv"], d));
    assert_eq!(topo, format!("label\n{labels}"));
}

#[test]
fn experiment_writes_results_and_contours_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cfg.json"),
        r#"{"experiment":"heatmap","n":[100,150],"eps":[1,"inf"],"replicates":2,"seed":9,"contour_alphas":[25]}"#,
    )
    .unwrap();
    ok(&privgraph(&["experiment", "--name", "heatmap", "--config", "cfg.json", "--out", "r1.csv"], d));
    ok(&privgraph(&["experiment", "--name", "heatmap", "--config", "cfg.json", "--out", "r2.csv"], d));
    let r1 = fs::read(d.join("r1.csv")).unwrap();
    assert_eq!(r1, fs::read(d.join("r2.csv")).unwrap());
    let text = String::from_utf8(r1).unwrap();
    assert!(text.starts_with("n,eps,replicate,d2inf_error,rho_check,flag\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    let contours = fs::read_to_string(d.join("r1.contours.csv")).unwrap();
    assert!(contours.starts_with("alpha,n,rho,eps\n"));
    assert_eq!(contours.lines().count(), 3);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.json"), r#"{"experiment":"sbm","n":[50],"eps":[1],"replicates":1,"seed":1,"colour":3}"#).unwrap();
    assert_eq!(privgraph(&["experiment", "--name", "sbm", "--config", "bad.json"], d).status.code(), Some(2));

    fs::write(d.join("sbm.json"), r#"{"experiment":"sbm","n":[50],"eps":[1],"replicates":1,"seed":1}"#).unwrap();
    assert_eq!(privgraph(&["experiment", "--name", "heatmap", "--config", "sbm.json"], d).status.code(), Some(2));

    fs::write(
        d.join("wide.json"),
        r#"{"signature":{"p":2,"q":0},"variant":"shifted_circle","center_norm":0.9,"radius":0.5}"#,
    )
    .unwrap();
    assert_eq!(privgraph(&["sample", "--latent", "wide.json", "--n", "10"], d).status.code(), Some(3));

    fs::write(d.join("latent.json"), CIRCLE).unwrap();
    ok(&privgraph(&["sample", "--latent", "latent.json", "--n", "4", "--latent-out", "x.csv"], d));
    fs::write(d.join("zero.csv"), "dim=2,signs=++,rho_check=1\n0,0\n0,0\n0,0\n0,0\n").unwrap();
    assert_eq!(privgraph(&["metric", "--a", "zero.csv", "--b", "x.csv"], d).status.code(), Some(4));
    assert_eq!(privgraph(&["metric", "--a", "zero.csv", "--b", "zero.csv"], d).status.code(), Some(2));

    assert_eq!(privgraph(&["flip", "--graph", "missing.txt", "--eps", "1"], d).status.code(), Some(1));
    assert_eq!(privgraph(&["flip", "--graph", "a.txt", "--eps", "-1"], d).status.code(), Some(2));
}
