//! Regenerates the fuzz corpus seeds from valid artifacts.

use nibb_core::burgers::watermelon_shape_between;
use nibb_core::measures::GridDensity;
use nibb_core::measures::WeylPoint;
use nibb_core::sde::{simulate_bridge, BridgeSpec, DriftMode, EndCondition};
use std::fs;
use std::path::Path;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let write = |target: &str, name: &str, bytes: &[u8]| {
        let dir = root.join(target);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join(name), bytes).unwrap();
    };

    // density_csv
    let sc = GridDensity::semicircle_with_points(2.0, 64).unwrap();
    write("density_csv", "semicircle", sc.to_csv_string().as_bytes());
    write(
        "density_csv",
        "uniform_with_header",
        b"x,value\n0.0,0.5\n1.0,0.5\n2.0,0.5\n",
    );
    write(
        "density_csv",
        "whitespace_and_comments",
        b"# tapered bump\n-1.0 0.0\n-0.5 0.6\n0.0 1.0\n0.5 0.6\n1.0 0.0\n",
    );

    // atoms_csv
    write("atoms_csv", "small", b"-1.5\n-0.25\n0.75\n2.0\n");
    write("atoms_csv", "with_header", b"position\n0.0\n1.0\n");

    // named_measure
    write("named_measure", "semicircle", b"semicircle(2)");
    write("named_measure", "uniform", b"uniform(0, 1)");
    write("named_measure", "point", b"point(0.5)");
    write("named_measure", "malformed", b"semicircle(2");

    // ensemble_bin
    let spec = BridgeSpec {
        n: 3,
        start: WeylPoint::closed(vec![0.0; 3]).unwrap(),
        end: EndCondition::Confluent(0.0),
        record_times: vec![0.5],
        drift_mode: DriftMode::Confluent,
        dt_max: 1e-2,
        dt_edge_factor: 0.1,
        seed: 7,
        samples: 2,
    };
    let ens = simulate_bridge(&spec).unwrap();
    write("ensemble_bin", "small_watermelon", &ens.to_bytes());
    let mut truncated = ens.to_bytes();
    truncated.truncate(truncated.len() / 2);
    write("ensemble_bin", "truncated", &truncated);

    // shape_json
    let shape = watermelon_shape_between(0.0, 0.0, &[0.5], 48).unwrap();
    write(
        "shape_json",
        "watermelon",
        shape.to_json_string().unwrap().as_bytes(),
    );
    write("shape_json", "empty_object", b"{}");

    // config_json
    write(
        "config_json",
        "watermelon_edgestats",
        br#"{
  "preset": "watermelon",
  "n": 64,
  "samples": 2000,
  "seed": 12345,
  "drift_mode": "mean-field",
  "record_times": [0.5],
  "edge": {"time": 0.5, "side": "right"},
  "tw2": {"quad_nodes": 64}
}
"#,
    );
    write(
        "config_json",
        "semicircle_simulate",
        br#"{
  "preset": "semicircle-to-semicircle",
  "n": 16,
  "samples": 50,
  "record_times": [0.25, 0.5, 0.75]
}
"#,
    );
    write(
        "config_json",
        "dominance",
        br#"{"preset": "watermelon", "n": 16, "samples": 1000, "dominance": {"shift": 0.1, "time": 0.5}}"#,
    );

    println!("corpus written under {}", root.display());
}
