//! Structural properties of walking, evaluation, kinematics, the solvers
//! and the benchmark tables.

mod common;

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix2, Vector2, Vector3};
use phong_fit::bench::{
    make_ellipsoid, rotation_error, run_study, sample_observations, write_study, ArmSpec, SamplingSpec, StudyConfig,
};
use phong_fit::energy::{assemble, energy_only, FitConfig, Observation, Optimizer};
use phong_fit::kinematics::{pose_rigid, PoseModel, RigidModel, RigidPose};
use phong_fit::mesh::{walk, ControlMesh, EdgeCrossing, SurfaceCoordinate, DEFAULT_CROSSING_CAP};
use phong_fit::solvers::{run_fit, solve_lifted};
use phong_fit::surfaces::{eval_point, evaluate, SurfaceKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ellipsoid() -> &'static ControlMesh {
    static MESH: std::sync::OnceLock<ControlMesh> = std::sync::OnceLock::new();
    MESH.get_or_init(|| make_ellipsoid(320).unwrap())
}

fn position(mesh: &ControlMesh, u: &SurfaceCoordinate) -> Vector3<f64> {
    mesh.point_at(u)
}

/// The local edge of `from` shared with `to`.
fn shared_edge(mesh: &ControlMesh, from: usize, to: usize) -> Option<usize> {
    (0..3).find(|&e| mesh.adjacency().neighbor(from, e).map(|l| l.triangle) == Some(to))
}

fn coordinate() -> impl Strategy<Value = SurfaceCoordinate> {
    (0..320usize, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(p, a, b)| {
        let (v, w) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        SurfaceCoordinate { patch: p, v, w }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn walk_output_is_valid_and_never_truncated_on_closed_mesh(
        u in coordinate(),
        dv in -2.0..2.0f64,
        dw in -2.0..2.0f64,
    ) {
        let mesh = ellipsoid();
        let out = walk(mesh, &u, Vector2::new(dv, dw), DEFAULT_CROSSING_CAP);
        prop_assert!(out.coordinate.is_valid());
        prop_assert!(!out.hit_boundary);
    }

    #[test]
    fn walk_back_returns_to_start(u in coordinate(), dv in -0.6..0.6f64, dw in -0.6..0.6f64) {
        let mesh = ellipsoid();
        let delta = Vector2::new(dv, dw);
        let out = walk(mesh, &u, delta, DEFAULT_CROSSING_CAP);
        prop_assume!(!out.truncated() && out.crossings <= 1);
        let back_delta = if out.crossings == 0 {
            -delta
        } else {
            let edge = shared_edge(mesh, u.patch, out.coordinate.patch);
            prop_assume!(edge.is_some());
            let crossing = EdgeCrossing::new(mesh, u.patch, edge.unwrap()).unwrap();
            -phong_fit::mesh::remap_across_edge(delta, &crossing)
        };
        let back = walk(mesh, &out.coordinate, back_delta, DEFAULT_CROSSING_CAP);
        let err = (position(mesh, &back.coordinate) - position(mesh, &u)).norm();
        prop_assert!(err <= 1e-7, "round trip error {}", err);
    }

    #[test]
    fn positions_agree_across_every_crossing(u in coordinate(), dv in -1.0..1.0f64, dw in -1.0..1.0f64) {
        let mesh = ellipsoid();
        // Walk with a crossing cap of one and compare the exit point seen
        // from both sides of the edge.
        let out = walk(mesh, &u, Vector2::new(dv, dw), 1);
        prop_assume!(out.crossings == 1);
        let edge = shared_edge(mesh, u.patch, out.coordinate.patch).unwrap();
        let crossing = EdgeCrossing::new(mesh, u.patch, edge).unwrap();
        let s: f64 = 0.37;
        let mut p = [0.0; 3];
        p[edge] = 1.0 - s;
        p[(edge + 1) % 3] = s;
        let q = crossing.map_point(p);
        let a = SurfaceCoordinate::from_barycentric(u.patch, p);
        let b = SurfaceCoordinate::from_barycentric(crossing.to_triangle, q);
        prop_assert!((position(mesh, &a) - position(mesh, &b)).norm() <= 1e-9);
    }
}

#[test]
fn phong_and_trimesh_share_positions_and_phong_normals_are_continuous() {
    let mesh = ellipsoid();
    let model = RigidModel::new(mesh.clone());
    let posed = model.pose(&DVector::from_vec(vec![0.1, 0.2, -0.3, 0.4, -0.5, 0.6]), false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for t in 0..mesh.triangle_count() {
        for e in 0..3 {
            let Some(crossing) = EdgeCrossing::new(mesh, t, e) else { continue };
            for _ in 0..10 {
                let s: f64 = rng.random();
                let mut p = [0.0; 3];
                p[e] = 1.0 - s;
                p[(e + 1) % 3] = s;
                let a = SurfaceCoordinate::from_barycentric(t, p);
                let b = SurfaceCoordinate::from_barycentric(crossing.to_triangle, crossing.map_point(p));
                let pa = eval_point(&posed, SurfaceKind::Phong, &a).unwrap();
                let pb = eval_point(&posed, SurfaceKind::Phong, &b).unwrap();
                let ta = eval_point(&posed, SurfaceKind::TriMesh, &a).unwrap();
                assert_eq!(pa.position, ta.position);
                assert!((pa.position - pb.position).norm() <= 1e-9);
                assert!((pa.normal - pb.normal).norm() <= 1e-9);
            }
        }
    }
}

#[test]
fn evaluation_is_rigidly_equivariant() {
    let mesh = ellipsoid();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let rest = pose_rigid(mesh, &RigidPose::identity());
    for _ in 0..100 {
        let pose = RigidPose::from_slice(common::random_theta(&mut rng, 6).as_slice());
        let posed = pose_rigid(mesh, &pose);
        let u = common::interior_coordinate(&mut rng, mesh.triangle_count());
        for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
            let a = eval_point(&posed, kind, &u).unwrap();
            let b = eval_point(&rest, kind, &u).unwrap();
            assert!((a.position - pose.transform_point(&b.position)).norm() <= 1e-9);
            assert!((a.normal - pose.rotation() * b.normal).norm() <= 1e-9);
        }
    }
}

#[test]
fn surface_jacobians_on_one_hundred_configurations() {
    for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
        let c = common::surface_coordinate_check(kind, 100);
        assert!(c.max_rel <= 1e-5, "{c:?}");
        let c = common::surface_theta_check(kind, &common::ellipsoid_model(), "rigid", 100);
        assert!(c.max_rel <= 1e-5, "{c:?}");
    }
}

#[test]
fn rigid_posing_is_an_isometry_and_composes() {
    let mesh = ellipsoid();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        let a = RigidPose::from_slice(common::random_theta(&mut rng, 6).as_slice());
        let b = RigidPose::from_slice(common::random_theta(&mut rng, 6).as_slice());
        let pa = pose_rigid(mesh, &a);
        for _ in 0..50 {
            let i = rng.random_range(0..mesh.vertex_count());
            let j = rng.random_range(0..mesh.vertex_count());
            let rest = (mesh.positions()[i] - mesh.positions()[j]).norm();
            assert!(((pa.positions[i] - pa.positions[j]).norm() - rest).abs() <= 1e-9);
        }
        // b applied after a equals posing by the composed transform.
        let rotation = b.rotation() * a.rotation();
        let translation = b.rotation() * a.translation() + b.translation();
        let axis = phong_fit::rotation::log_map(&rotation);
        let composed = pose_rigid(mesh, &RigidPose::new(translation, axis));
        for (p, q) in pa.positions.iter().zip(&composed.positions) {
            assert!((b.transform_point(p) - q).norm() <= 1e-9);
        }
    }
}

#[test]
fn zero_normal_weight_ignores_normals() {
    let model = common::ellipsoid_model();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let posed = model.pose(&common::random_theta(&mut rng, 6), true).unwrap();
    let data = common::random_observations(&mut rng, &posed, 10);
    let flipped: Vec<_> = data.iter().map(|o| Observation::new(o.point, -o.normal).unwrap()).collect();
    let u: Vec<_> = (0..10).map(|_| common::interior_coordinate(&mut rng, 320)).collect();
    for kind in [SurfaceKind::Phong, SurfaceKind::TriMesh] {
        let a = energy_only(&posed, kind, &u, &data, 0.0).unwrap();
        let b = energy_only(&posed, kind, &u, &flipped, 0.0).unwrap();
        assert_eq!(a, b);
    }
}

/// With flat normals and no normal term, each correspondence update is the
/// damped Gauss-Newton footpoint move in its own patch given the pose update.
#[test]
fn lifted_correspondence_step_is_per_datum_footpoint_move() {
    let model = common::ellipsoid_model();
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..20 {
        let posed = model.pose(&common::random_theta(&mut rng, 6), true).unwrap();
        let data = common::random_observations(&mut rng, &posed, 15);
        let u: Vec<_> = (0..15).map(|_| common::interior_coordinate(&mut rng, 320)).collect();
        let system = assemble(&posed, SurfaceKind::TriMesh, &u, &data, 0.0).unwrap();
        let damping = 1e-3;
        let step = solve_lifted(&system, damping).unwrap();
        let d = data.len() as f64;
        for (i, (ui, obs)) in u.iter().zip(&data).enumerate() {
            let [a, b, c] = posed.corners(ui.patch);
            let (e1, e2) = (b - a, c - a);
            let s = a + e1 * ui.v + e2 * ui.w;
            let jt = evaluate(&posed, SurfaceKind::TriMesh, ui).unwrap().ds_dtheta;
            let r = s - obs.point + jt * &step.delta_theta;
            let m = Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2)) / d + Matrix2::identity() * damping;
            let g = Vector2::new(e1.dot(&r), e2.dot(&r)) / d;
            let expected = -(m.try_inverse().unwrap() * g);
            assert!((step.delta_u[i] - expected).norm() <= 1e-9 * (1.0 + expected.norm()));
        }
    }
}

#[test]
fn icp_recovers_pure_translation_on_one_triangle() {
    let mesh = ControlMesh::from_geometry(
        vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let model = RigidModel::new(mesh);
    let offset = Vector3::new(0.0, 0.0, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let source: Vec<Vector3<f64>> = (0..30)
        .map(|_| {
            let u = common::interior_coordinate(&mut rng, 1);
            model.mesh.point_at(&u)
        })
        .collect();
    let data: Vec<_> = source.iter().map(|p| Observation::new(p + offset, Vector3::z()).unwrap()).collect();
    let centroid = |v: &[Vector3<f64>]| v.iter().sum::<Vector3<f64>>() / v.len() as f64;
    let targets: Vec<_> = data.iter().map(|o| o.point).collect();
    let expected = centroid(&targets) - centroid(&source);
    let config = FitConfig {
        optimizer: Optimizer::Icp,
        lambda_n: 0.0,
        max_iterations: 3,
        ..FitConfig::default()
    };
    // Near-undamped so the step is the plain least-squares solve.
    let mut config = config;
    config.damping.initial = 1e-12;
    let report = run_fit(&model, &data, &DVector::zeros(6), &config).unwrap();
    assert!(report.iterations <= 3);
    let t = Vector3::new(report.theta[0], report.theta[1], report.theta[2]);
    assert!((t - expected).norm() <= 1e-8, "{t:?} vs {expected:?}");
    assert!(report.theta.rows(3, 3).norm() <= 1e-8);
}

#[test]
fn icp_correspondence_update_never_raises_position_energy() {
    let model = common::ellipsoid_model();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..10 {
        let gt = common::random_theta(&mut rng, 6);
        let spec = SamplingSpec {
            count: 100,
            noise: 0.1,
            symmetric_noise: false,
            visible_only: true,
        };
        let sample = sample_observations(&model, &gt, &spec, &mut rng).unwrap();
        let config = FitConfig {
            optimizer: Optimizer::Icp,
            lambda_n: 0.0,
            max_iterations: 20,
            ..FitConfig::default()
        };
        let report = run_fit(&model, &sample.observations, &DVector::zeros(6), &config).unwrap();
        for (k, s) in report.steps.iter().enumerate() {
            assert!(s.energy_before <= report.energy_trace[k] * (1.0 + 1e-12));
        }
        assert!(report.is_monotone());
    }
}

#[test]
fn fit_does_not_depend_on_data_order() {
    let model = common::ellipsoid_model();
    let mut rng = ChaCha8Rng::seed_from_u64(38);
    let gt = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.4, 0.4, 0.4]);
    let spec = SamplingSpec {
        count: 80,
        noise: 0.05,
        symmetric_noise: false,
        visible_only: true,
    };
    let data = sample_observations(&model, &gt, &spec, &mut rng).unwrap().observations;
    let mut reversed = data.clone();
    reversed.reverse();
    let config = FitConfig {
        max_iterations: 20,
        ..FitConfig::default()
    };
    let a = run_fit(&model, &data, &DVector::zeros(6), &config).unwrap();
    let b = run_fit(&model, &reversed, &DVector::zeros(6), &config).unwrap();
    assert!((a.theta - b.theta).norm() <= 1e-8);
}

#[test]
fn area_weighted_patch_selection_passes_chi_square() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let mesh = ellipsoid();
    let model = RigidModel::new(mesh.clone());
    let spec = SamplingSpec {
        count: 1_000_000,
        noise: 0.0,
        symmetric_noise: false,
        visible_only: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    let sample = sample_observations(&model, &DVector::zeros(6), &spec, &mut rng).unwrap();
    let mut counts = vec![0usize; mesh.triangle_count()];
    for u in &sample.coordinates {
        counts[u.patch] += 1;
    }
    let total_area: f64 = (0..mesh.triangle_count()).map(|t| mesh.triangle_area(t)).sum();
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            let expected = spec.count as f64 * mesh.triangle_area(t) / total_area;
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    let dof = (mesh.triangle_count() - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn visible_only_samples_face_the_camera() {
    let model = common::ellipsoid_model();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let spec = SamplingSpec {
        count: 2000,
        noise: 0.1,
        symmetric_noise: false,
        visible_only: true,
    };
    for _ in 0..5 {
        let theta = common::random_theta(&mut rng, 6);
        let posed = model.pose(&theta, false).unwrap();
        let sample = sample_observations(&model, &theta, &spec, &mut rng).unwrap();
        assert!(sample.coordinates.iter().all(|u| posed.face_normal(u.patch).z > 0.0));
    }
}

#[test]
fn aggregate_tables_match_recomputation_from_per_trial_rows() {
    let arms = vec![
        ArmSpec::new(SurfaceKind::Phong, Optimizer::Lifted, 1.0),
        ArmSpec::new(SurfaceKind::TriMesh, Optimizer::Icp, 0.0),
    ];
    let mut config = StudyConfig::new(5, 9, arms);
    config.iterations = 8;
    config.checkpoints = vec![3];
    config.angle_bins = 6;
    let result = run_study(&config).unwrap();
    for arm in &result.arms {
        assert!(arm.trials.iter().all(|t| t.monotone));
    }
    let dir = tempfile::tempdir().unwrap();
    write_study(&result, dir.path()).unwrap();

    // (arm, iteration) -> per-trial errors in trial order.
    let mut errors: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    let mut r = csv::Reader::from_path(dir.path().join("iterations.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (arm_c, it_c, err_c) = (col("arm"), col("iteration"), col("error_deg"));
    for row in r.records() {
        let row = row.unwrap();
        errors
            .entry((row[arm_c].to_string(), row[it_c].parse().unwrap()))
            .or_default()
            .push(row[err_c].parse().unwrap());
    }
    let mut checked = 0;
    for file in ["convergence.csv", "ablation.csv"] {
        let mut r = csv::Reader::from_path(dir.path().join(file)).unwrap();
        let headers = r.headers().unwrap().clone();
        let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
        let (arm_c, it_c, mean_c, sd_c, count_c) = (col("arm"), col("iteration"), col("mean_error_deg"), col("stdev"), col("count"));
        for row in r.records() {
            let row = row.unwrap();
            let e = &errors[&(row[arm_c].to_string(), row[it_c].parse().unwrap())];
            let n = e.len() as f64;
            let mean = e.iter().sum::<f64>() / n;
            let sd = (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert_eq!(row[count_c].parse::<usize>().unwrap(), e.len());
            assert_eq!(row[mean_c].parse::<f64>().unwrap(), mean);
            assert_eq!(row[sd_c].parse::<f64>().unwrap(), sd);
            checked += 1;
        }
    }
    assert_eq!(checked, 2 * (9 + 2));

    // Zero-iteration errors equal the neutral-pose error.
    for t in &result.arms[0].trials {
        let y = t.gt_angle_deg.to_radians();
        let gt = DVector::from_vec(vec![0.0, 0.0, 0.0, y, y, y]);
        assert_eq!(t.errors[0], rotation_error(&DVector::zeros(6), &gt));
    }
}
