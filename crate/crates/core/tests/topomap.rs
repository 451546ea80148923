mod common;

use rand::Rng;
use stiln::signal::BandFeature;
use stiln::topomap::{
    biharmonic_eval, biharmonic_fit, deap_layout, deap_spherical, green, grid_coords, mirror_index,
    project_layout, read_frame_cache, write_frame_cache, BiharmonicModel, TopoFrame, TopoMapper,
    CHANNEL_NAMES, FRAME_SIZE, GRID_SIZE, PAD,
};
use stiln::Error;

/// Gauss-Jordan elimination with full row reduction, independent of the
/// library's LU path.
fn gauss_jordan(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
        }
        b[col] /= d;
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                }
                b[i] -= f * b[col];
            }
        }
    }
    b
}

/// Interpolation conditions plus zero-sum weights, solved exactly.
fn oracle_fit(points: &[[f64; 2]], values: &[f64]) -> (Vec<f64>, f64) {
    let n = points.len();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            let r = ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2))
                .sqrt();
            a[i][j] = if r > 0.0 { r * r * (r.ln() - 1.0) } else { 0.0 };
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
    }
    let mut b = values.to_vec();
    b.push(0.0);
    let mut sol = gauss_jordan(a, b);
    let c = sol.pop().unwrap();
    (sol, c)
}

fn sum_eval(model: &BiharmonicModel, x: f64, y: f64) -> f64 {
    let mut v = model.offset;
    for j in 0..model.centers.len() {
        let r = ((x - model.centers[j][0]).powi(2) + (y - model.centers[j][1]).powi(2)).sqrt();
        v += model.weights[j] * if r > 0.0 { r * r * (r.ln() - 1.0) } else { 0.0 };
    }
    v
}

fn random_values(seed: u64) -> Vec<f64> {
    let mut r = common::rng(seed);
    (0..32).map(|_| r.random_range(0.0..10.0)).collect()
}

fn feature_from_bands(bands: &[Vec<f64>]) -> BandFeature {
    let values = (0..32)
        .flat_map(|e| bands.iter().map(move |b| b[e]))
        .collect();
    BandFeature::new(values).unwrap()
}

#[test]
fn layout_properties() {
    let l = deap_layout();
    assert_eq!(l.len(), 32);
    let cz = l.index_of("Cz").unwrap();
    assert_eq!((l.entries()[cz].x, l.entries()[cz].y), (0.0, 0.0));
    for (i, e) in l.entries().iter().enumerate() {
        assert_eq!(e.name, CHANNEL_NAMES[i]);
        assert!(e.x.hypot(e.y) <= 1.0);
        let m = &l.entries()[mirror_index(i)];
        assert_eq!(m.x, -e.x, "{} vs {}", e.name, m.name);
        assert_eq!(m.y, e.y);
        for o in &l.entries()[..i] {
            assert!((o.x - e.x).hypot(o.y - e.y) > 0.05);
        }
    }
    let f3 = &l.entries()[l.index_of("F3").unwrap()];
    let f4 = &l.entries()[l.index_of("F4").unwrap()];
    assert!(f3.x < 0.0 && f3.y > 0.0);
    assert_eq!((f3.x, f3.y), (-f4.x, f4.y));
    // front of the head is +y
    assert!(l.entries()[l.index_of("Fp1").unwrap()].y > l.entries()[l.index_of("O1").unwrap()].y);
}

#[test]
fn projection_rejects_duplicates() {
    let mut sph = deap_spherical();
    sph[5] = sph[6];
    assert!(matches!(
        project_layout(&CHANNEL_NAMES, &sph),
        Err(Error::Layout(_))
    ));
}

#[test]
fn fit_reproduces_data_for_random_datasets() {
    let points = deap_layout().points();
    for seed in 0..100 {
        let values = random_values(seed);
        let m = biharmonic_fit(&points, &values).unwrap();
        for (p, v) in points.iter().zip(&values) {
            assert!((m.eval(*p) - v).abs() < 1e-6, "seed {seed}");
        }
    }
}

#[test]
fn three_random_points_match_gauss_jordan() {
    for seed in 0..10 {
        let mut r = common::rng(seed);
        let points: Vec<[f64; 2]> = (0..3)
            .map(|_| [r.random_range(-0.9..0.9), r.random_range(-0.9..0.9)])
            .collect();
        let values: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let m = biharmonic_fit(&points, &values).unwrap();
        let (w, c) = oracle_fit(&points, &values);
        for (a, b) in m.weights.iter().zip(&w) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((m.offset - c).abs() < 1e-9);
        for (p, v) in points.iter().zip(&values) {
            assert!((m.eval(*p) - v).abs() < 1e-6);
        }
    }
}

#[test]
fn two_symmetric_points() {
    let pts = [[0.3, 0.5], [-0.3, -0.5]];
    let m = biharmonic_fit(&pts, &[1.0, 4.0]).unwrap();
    assert!((m.eval(pts[0]) - 1.0).abs() < 1e-6);
    assert!((m.eval(pts[1]) - 4.0).abs() < 1e-6);
    assert!((m.eval([0.0, 0.0]) - 2.5).abs() < 1e-6);
}

#[test]
fn constant_data() {
    let points = deap_layout().points();
    let m = biharmonic_fit(&points, &[7.5; 32]).unwrap();
    for p in &points {
        assert!((m.eval(*p) - 7.5).abs() < 1e-6);
    }
}

#[test]
fn eval_matches_double_loop_and_masks() {
    let points = deap_layout().points();
    let mapper = TopoMapper::deap();
    let coords = grid_coords(GRID_SIZE);
    for seed in 0..5 {
        let values = random_values(seed);
        let m = biharmonic_fit(&points, &values).unwrap();
        let grid = biharmonic_eval(&m, GRID_SIZE);
        let fast = mapper.interior(&values);
        for (r, &y) in coords.iter().rev().enumerate() {
            for (c, &x) in coords.iter().enumerate() {
                let want = if (x * x + y * y).sqrt() > 1.0 {
                    0.0
                } else {
                    sum_eval(&m, x, y)
                };
                assert!((grid[r * GRID_SIZE + c] - want).abs() < 1e-6);
                assert!((fast[r * GRID_SIZE + c] - want).abs() < 1e-6);
            }
        }
        // corner (1, 1) sits outside the head
        assert_eq!(grid[GRID_SIZE - 1], 0.0);
        assert_eq!(fast[GRID_SIZE - 1], 0.0);
    }
    assert_eq!(green(1.0), -1.0);
}

#[test]
fn zero_feature_gives_zero_frame() {
    let frame = TopoMapper::deap()
        .assemble(&BandFeature::new(vec![0.0; 160]).unwrap())
        .unwrap();
    assert_eq!(frame, TopoFrame::zeros());
}

#[test]
fn border_is_zero_for_random_input() {
    let mapper = TopoMapper::deap();
    for seed in 0..10 {
        let bands: Vec<Vec<f64>> = (0..5).map(|b| random_values(seed * 5 + b)).collect();
        let frame = mapper.assemble(&feature_from_bands(&bands)).unwrap();
        for r in 0..FRAME_SIZE {
            for c in 0..FRAME_SIZE {
                if r < PAD || c < PAD || r >= FRAME_SIZE - PAD || c >= FRAME_SIZE - PAD {
                    for b in 0..5 {
                        assert_eq!(frame.get(r, c, b), 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn nearest_pixel_tracks_electrode_power() {
    let mapper = TopoMapper::deap();
    let layout = deap_layout();
    let coords = grid_coords(GRID_SIZE);
    let nearest = |v: f64| {
        (0..GRID_SIZE)
            .min_by(|&a, &b| (coords[a] - v).abs().total_cmp(&(coords[b] - v).abs()))
            .unwrap()
    };
    for seed in 0..10 {
        let mut r = common::rng(seed);
        let bands: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let (a, b, cx, cy) = (
                    r.random_range(-2.0..2.0),
                    r.random_range(-2.0..2.0),
                    r.random_range(-0.5..0.5),
                    r.random_range(-0.5..0.5),
                );
                layout
                    .entries()
                    .iter()
                    .map(|e| {
                        5.0 + a * e.x
                            + b * e.y
                            + 3.0 * (-((e.x - cx).powi(2) + (e.y - cy).powi(2)) / 0.2).exp()
                    })
                    .collect()
            })
            .collect();
        let frame = mapper.assemble(&feature_from_bands(&bands)).unwrap();
        for (band, vals) in bands.iter().enumerate() {
            let px: Vec<f64> = layout
                .entries()
                .iter()
                .map(|e| {
                    let col = nearest(e.x) + PAD;
                    let row = GRID_SIZE - 1 - nearest(e.y) + PAD;
                    frame.get(row, col, band) as f64
                })
                .collect();
            let corr = pearson(vals, &px);
            assert!(corr > 0.9, "seed {seed} band {band}: r = {corr}");
        }
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn frames_are_linear_in_the_data() {
    let mapper = TopoMapper::deap();
    for seed in 0..10 {
        let d1: Vec<Vec<f64>> = (0..5).map(|b| random_values(100 + seed * 10 + b)).collect();
        let d2: Vec<Vec<f64>> = (0..5).map(|b| random_values(200 + seed * 10 + b)).collect();
        let (alpha, beta) = (0.7, 2.3);
        let mix: Vec<Vec<f64>> = d1
            .iter()
            .zip(&d2)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| alpha * p + beta * q).collect())
            .collect();
        let f1 = mapper.assemble(&feature_from_bands(&d1)).unwrap();
        let f2 = mapper.assemble(&feature_from_bands(&d2)).unwrap();
        let fm = mapper.assemble(&feature_from_bands(&mix)).unwrap();
        for i in 0..fm.data().len() {
            let want = alpha * f1.data()[i] as f64 + beta * f2.data()[i] as f64;
            let got = fm.data()[i] as f64;
            assert!(
                (got - want).abs() <= 1e-5 * want.abs().max(1.0),
                "{got} vs {want}"
            );
        }
    }
}

#[test]
fn mirrored_input_mirrors_the_frame() {
    let mapper = TopoMapper::deap();
    for seed in 0..10 {
        let bands: Vec<Vec<f64>> = (0..5).map(|b| random_values(300 + seed * 10 + b)).collect();
        let mirrored: Vec<Vec<f64>> = bands
            .iter()
            .map(|v| (0..32).map(|e| v[mirror_index(e)]).collect())
            .collect();
        let f = mapper.assemble(&feature_from_bands(&bands)).unwrap();
        let g = mapper.assemble(&feature_from_bands(&mirrored)).unwrap();
        for r in 0..FRAME_SIZE {
            for c in 0..FRAME_SIZE {
                for b in 0..5 {
                    let (x, y) = (f.get(r, c, b), g.get(r, FRAME_SIZE - 1 - c, b));
                    assert!((x - y).abs() < 1e-4 * x.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn log_power_flag() {
    let mut mapper = TopoMapper::deap();
    let raw = feature_from_bands(&vec![vec![9.0; 32]; 5]);
    assert!((mapper.assemble(&raw).unwrap().get(16, 16, 0) - 9.0).abs() < 1e-4);
    mapper.log_power = true;
    assert!((mapper.assemble(&raw).unwrap().get(16, 16, 0) - 1.0).abs() < 1e-5);
}

#[test]
fn frame_cache_roundtrip_and_png() {
    let dir = tempfile::tempdir().unwrap();
    let mapper = TopoMapper::deap();
    let frames: Vec<TopoFrame> = (0..3)
        .map(|s| {
            let bands: Vec<Vec<f64>> = (0..5).map(|b| random_values(400 + s * 5 + b)).collect();
            mapper.assemble(&feature_from_bands(&bands)).unwrap()
        })
        .collect();
    let path = dir.path().join("frames.bin");
    write_frame_cache(&path, &frames).unwrap();
    assert_eq!(read_frame_cache(&path).unwrap(), frames);
    let img = frames[0].band_image(2);
    assert_eq!(img.dimensions(), (32, 32));
    img.save(dir.path().join("alpha.png")).unwrap();
}

#[test]
fn deterministic_frames() {
    let bands: Vec<Vec<f64>> = (0..5).map(|b| random_values(500 + b)).collect();
    let f = feature_from_bands(&bands);
    assert_eq!(
        TopoMapper::deap().assemble(&f).unwrap(),
        TopoMapper::deap().assemble(&f).unwrap()
    );
}
