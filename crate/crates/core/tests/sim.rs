use std::collections::VecDeque;
use std::fs;

use nalgebra::DMatrix;
use proptest::prelude::*;
use vpal::graph::{graphtv_apply, MeshGraph};
use vpal::linalg::io::{decode_csv, encode_csv, FormatError};
use vpal::linalg::DenseMatrix;
use vpal::sim::{
    add_noise, icosphere, leadfield_from_sensors, load_dataset, make_leadfield, make_mesh, save_dataset,
    sensor_positions, simulate, simulate_sources, source_seeds, MeshKind, SimConfig, SimError, SourceSpec,
};
use vpal_testkit as tk;

/// Plain BFS, kept separate from the library's traversal.
fn bfs(g: &MeshGraph, s: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); g.num_nodes()];
    for (a, b, _) in g.edges() {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![None; g.num_nodes()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

#[test]
fn mesh_sizes_and_connectivity() {
    let g = make_mesh(MeshKind::Grid2d, 9, 0).unwrap();
    assert_eq!((g.num_nodes(), g.num_edges()), (9, 12));
    let g = icosphere(1).unwrap();
    assert_eq!((g.num_nodes(), g.num_edges()), (12, 30));
    for seed in 0..3 {
        let g = make_mesh(MeshKind::RandomGeometric, 200, seed).unwrap();
        assert!(g.num_nodes().abs_diff(200) <= 20);
        assert!(bfs(&g, 0).iter().all(Option::is_some), "seed {seed}");
        for c in g.coords() {
            assert!(c.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12);
        }
    }
    for n in [100, 400, 1000] {
        let g = make_mesh(MeshKind::Grid2d, n, 0).unwrap();
        assert!(g.num_nodes().abs_diff(n) * 10 <= n);
        assert!(bfs(&g, 0).iter().all(Option::is_some));
    }
    let g = make_mesh(MeshKind::Icosphere, 1000, 0).unwrap();
    assert!(g.num_nodes().abs_diff(1000) <= 100);
    assert!(make_mesh(MeshKind::Grid2d, 3, 0).is_err());
}

#[test]
fn leadfield_rows_and_rank() {
    let mesh = make_mesh(MeshKind::RandomGeometric, 200, 4).unwrap();
    let l = make_leadfield(&mesh, 20, 4).unwrap();
    assert_eq!(l.shape(), (20, mesh.num_nodes()));
    let sv = singular_values(&tk::to_na(&l));
    assert!(sv.iter().all(|&s| s > 1e-8), "{sv:?}");
    for i in 0..20 {
        let norm: f64 = l.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-14);
    }

    let one = make_leadfield(&mesh, 1, 9).unwrap();
    assert!(one.row(0).iter().all(|&v| v > 0.0));
    assert!(make_leadfield(&mesh, mesh.num_nodes(), 0).is_err());
}

#[test]
fn closest_node_holds_the_row_maximum() {
    let mesh = icosphere(3).unwrap();
    // A sensor straight above node j.
    for j in [0, 17, 50] {
        let v = mesh.coords()[j];
        let s = [1.2 * v[0], 1.2 * v[1], 1.2 * v[2]];
        let l = leadfield_from_sensors(&mesh, &[s]);
        let (arg, _) = l.row(0).iter().enumerate().fold((0, f64::MIN), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
        assert_eq!(arg, j);
    }
    // Generated sensors: the nearest node is the row maximum.
    let sensors = sensor_positions(&mesh, 12, 3, 0);
    let l = leadfield_from_sensors(&mesh, &sensors);
    for (i, s) in sensors.iter().enumerate() {
        let d2 = |c: &[f64; 3]| (0..3).map(|d| (s[d] - c[d]).powi(2)).sum::<f64>();
        let nearest = (0..mesh.num_nodes())
            .min_by(|&a, &b| d2(&mesh.coords()[a]).total_cmp(&d2(&mesh.coords()[b])))
            .unwrap();
        let row = l.row(i);
        assert!(row.iter().all(|&x| x <= row[nearest]));
        let r = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((r - 1.2).abs() < 1e-9, "sensor radius {r}");
    }
}

#[test]
fn first_frame_is_the_seed_profile() {
    let mesh = make_mesh(MeshKind::Grid2d, 49, 0).unwrap();
    let spec = SourceSpec {
        num_sources: 1,
        amplitude: 2.0,
        propagation_speed: 0.5,
        decay: 0.5,
    };
    let x = simulate_sources(&mesh, &spec, 1, 7).unwrap();
    let seed = source_seeds(&mesh, &spec, 7)[0];
    let d = bfs(&mesh, seed);
    for v in 0..mesh.num_nodes() {
        let hop = d[v].unwrap() as f64;
        // Reach 0.5 at t = 1, cut at ceil(0.5) + 2 = 3 hops.
        let want = if hop <= 3.0 { 2.0 * 0.5f64.powf((hop - 0.5).max(0.0)) } else { 0.0 };
        assert_eq!(x[(v, 0)], want, "node {v}");
    }
    assert!(x.max() == 2.0 && x[(seed, 0)] == 2.0);
}

#[test]
fn plateau_on_a_path_is_the_radius_t_ball() {
    let mesh = MeshGraph::path(41);
    let spec = SourceSpec {
        num_sources: 1,
        amplitude: 1.0,
        propagation_speed: 1.0,
        decay: 0.4,
    };
    let t = 6;
    let x = simulate_sources(&mesh, &spec, t, 2).unwrap();
    let seed = source_seeds(&mesh, &spec, 2)[0];
    let d = bfs(&mesh, seed);
    for col in 0..t {
        let time = col + 1;
        for v in 0..41 {
            let inside = d[v].unwrap() <= time;
            assert_eq!(x[(v, col)] == 1.0, inside, "t = {time}, node {v}");
        }
    }
}

#[test]
fn decay_one_counts_boundary_edges() {
    for seed in 0..5 {
        let mut r = tk::rng(seed);
        let mesh = tk::random_graph(&mut r, 60, 70, true);
        let spec = SourceSpec {
            num_sources: 1,
            amplitude: 1.5,
            propagation_speed: 0.7,
            decay: 1.0,
        };
        let t = 4;
        let x = simulate_sources(&mesh, &spec, t, seed).unwrap();
        let d = bfs(&mesh, source_seeds(&mesh, &spec, seed)[0]);
        let tv = graphtv_apply(&mesh, &x).unwrap();
        for col in 0..t {
            let cutoff = (0.7 * (col + 1) as f64).ceil() as usize + 2;
            let inside = |v: usize| d[v].unwrap() <= cutoff;
            let boundary: f64 = mesh
                .edges()
                .filter(|&(a, b, _)| inside(a) != inside(b))
                .map(|(_, _, w)| 1.5 * w)
                .sum();
            let l1: f64 = (0..mesh.num_edges()).map(|k| tv[(k, col)].abs()).sum();
            assert!((l1 - boundary).abs() <= 1e-12 * boundary.max(1.0), "seed {seed} t {col}");
            let nonzero = (0..mesh.num_edges()).filter(|&k| tv[(k, col)] != 0.0).count();
            let crossing = mesh.edges().filter(|&(a, b, _)| inside(a) != inside(b)).count();
            assert_eq!(nonzero, crossing);
        }
    }
}

#[test]
fn sources_are_deterministic_and_additive() {
    let mesh = make_mesh(MeshKind::RandomGeometric, 80, 1).unwrap();
    let spec = SourceSpec::default();
    let a = simulate_sources(&mesh, &spec, 5, 3).unwrap();
    assert_eq!(a, simulate_sources(&mesh, &spec, 5, 3).unwrap());
    let seeds = source_seeds(&mesh, &spec, 3);
    assert_eq!(seeds.len(), 2);
    let mut sum = DenseMatrix::zeros(mesh.num_nodes(), 5);
    for &s in &seeds {
        let d = bfs(&mesh, s);
        for col in 0..5 {
            let reach = 0.5 * (col + 1) as f64;
            for v in 0..mesh.num_nodes() {
                let hop = d[v].unwrap() as f64;
                if hop <= reach.ceil() + 2.0 {
                    sum[(v, col)] += 0.5f64.powf((hop - reach).max(0.0));
                }
            }
        }
    }
    assert!(a.dist(&sum) <= 1e-15 * sum.norm());
    assert!(simulate_sources(&mesh, &spec, 0, 3).is_err());
    let bad = SourceSpec { num_sources: 0, ..spec };
    assert!(simulate_sources(&mesh, &bad, 3, 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noise_level_is_exact(seed in any::<u64>(), level in 0.0f64..2.0, rows in 1usize..12, cols in 1usize..8) {
        let mut r = tk::rng(seed);
        let clean = tk::gaussian(&mut r, rows, cols);
        let b = add_noise(&clean, level, seed).unwrap();
        let got = b.dist(&clean) / clean.norm();
        prop_assert!((got - level).abs() <= 1e-12 * level.max(1e-300) || (level == 0.0 && got == 0.0));
        prop_assert_eq!(b, add_noise(&clean, level, seed).unwrap());
    }
}

#[test]
fn noise_edge_cases() {
    let clean = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
    assert_eq!(add_noise(&clean, 0.0, 1).unwrap(), clean);
    assert!(matches!(add_noise(&DenseMatrix::zeros(3, 2), 0.1, 1), Err(SimError::ZeroSignal)));
    assert!(add_noise(&clean, -0.1, 1).is_err());
    assert_ne!(add_noise(&clean, 0.1, 1).unwrap(), add_noise(&clean, 0.1, 2).unwrap());
}

#[test]
fn simulate_is_a_pure_function_of_the_config() {
    let cfg = SimConfig {
        kind: MeshKind::RandomGeometric,
        n: 120,
        t: 6,
        seed: 17,
        ..SimConfig::default()
    };
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    let clean = a.leadfield.matmul(&a.x_true).unwrap();
    assert!((a.b.dist(&clean) / clean.norm() - 0.1).abs() <= 1e-12);
    let other = simulate(&SimConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.b, other.b);
}

#[test]
fn dataset_round_trip_is_bit_exact() {
    let ds = simulate(&SimConfig {
        kind: MeshKind::Icosphere,
        n: 162,
        t: 5,
        seed: 3,
        ..SimConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
    for (a, b) in back.b.as_slice().iter().zip(ds.b.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    // Independent text export of every matrix agrees with the binary files.
    for (name, m) in [("L", &back.leadfield), ("Xtrue", &back.x_true), ("B", &back.b)] {
        let csv = dir.path().join(format!("{name}.csv"));
        fs::write(&csv, encode_csv(m)).unwrap();
        assert_eq!(&decode_csv(&fs::read_to_string(&csv).unwrap()).unwrap(), m, "{name}");
    }
}

#[test]
fn damaged_datasets_are_rejected() {
    let ds = simulate(&SimConfig {
        kind: MeshKind::Grid2d,
        n: 25,
        t: 3,
        ..SimConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();

    let path = dir.path().join("B.dmat");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    match load_dataset(dir.path()) {
        Err(SimError::Format(FormatError::Truncated { offset, .. })) => assert!(offset > 0),
        other => panic!("expected truncation, got {other:?}"),
    }
    fs::write(&path, &bytes).unwrap();

    let meta = dir.path().join("meta.txt");
    let text = fs::read_to_string(&meta).unwrap();
    fs::write(&meta, text.replace("format_version=1", "format_version=2")).unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(SimError::Format(FormatError::Version { .. }))));
    fs::write(&meta, text.replace("seed=", "sead=")).unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(SimError::Format(FormatError::MissingField(_)))));
    fs::write(&meta, &text).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
}

/// `[I (x) L; lambda (D1^T (x) I); I (x) D2]`, acting on `vec(X)`.
fn stacked(l: &DenseMatrix, mesh: &MeshGraph, t: usize, lambda: f64, with_d2: bool) -> DMatrix<f64> {
    let it = DMatrix::identity(t, t);
    let top = tk::kron(&it, &tk::to_na(l));
    let mid = tk::kron(&tk::dense_d1(t).transpose(), &DMatrix::identity(mesh.num_nodes(), mesh.num_nodes())) * lambda;
    let mut blocks = vec![top, mid];
    if with_d2 {
        blocks.push(tk::kron(&it, &tk::dense_d2(mesh)));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, mesh.num_nodes() * t);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), (b.nrows(), b.ncols())).copy_from(&b);
        r0 += b.nrows();
    }
    out
}

#[test]
fn generated_problems_have_full_column_rank() {
    for (kind, n) in [(MeshKind::Grid2d, 16), (MeshKind::RandomGeometric, 30), (MeshKind::Icosphere, 42)] {
        for seed in 0..3 {
            let ds = simulate(&SimConfig {
                kind,
                n,
                t: 3,
                seed,
                ..SimConfig::default()
            })
            .unwrap();
            let a = stacked(&ds.leadfield, &ds.mesh, 3, 0.1, true);
            let smin = singular_values(&a).into_iter().fold(f64::INFINITY, f64::min);
            assert!(smin > 1e-8, "{kind} seed {seed}: {smin:e}");
            // Without the edge block, p < n leaves a null space.
            let a = stacked(&ds.leadfield, &ds.mesh, 3, 0.1, false);
            let smin = singular_values(&a).into_iter().fold(f64::INFINITY, f64::min);
            assert!(smin < 1e-10, "{kind} seed {seed}: {smin:e}");
        }
    }
}
