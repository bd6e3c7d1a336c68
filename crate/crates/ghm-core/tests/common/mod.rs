//! Shared helpers for the integration suites: the reference tree, an
//! exhaustive grid-search oracle for the training objective, and the
//! hand-built ingestion fixture.
//!
//! Each suite uses its own subset.
#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use ghm_core::corpus::{GeoRecord, Location, RegionPolygons};
use ghm_core::{CountMatrix, GeoTree, NodeSpec};

/// 1 root, 2 cities, 65 leaves (37 + 28), depth 3 — the reference shape
/// used by the synthetic evaluation.
pub fn two_city_tree() -> Arc<GeoTree> {
    let mut specs = vec![
        NodeSpec {
            id: "usa".into(),
            name: "United States".into(),
            parent: None,
        },
        NodeSpec {
            id: "sf".into(),
            name: "San Francisco".into(),
            parent: Some("usa".into()),
        },
        NodeSpec {
            id: "mh".into(),
            name: "Manhattan".into(),
            parent: Some("usa".into()),
        },
    ];
    for i in 0..37 {
        specs.push(NodeSpec {
            id: format!("sf/n{i:02}"),
            name: format!("SF neighborhood {i}"),
            parent: Some("sf".into()),
        });
    }
    for i in 0..28 {
        specs.push(NodeSpec {
            id: format!("mh/n{i:02}"),
            name: format!("MH neighborhood {i}"),
            parent: Some("mh".into()),
        });
    }
    Arc::new(GeoTree::build(&specs).unwrap())
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Grid-search oracle for the smoothed training objective
//
//   J(theta, pi) = sum_{n,t} x_nt ln sum_z theta_z(t) pi_n(z)
//               + alpha * sum_{v,t} ln theta_v(t) + beta * sum_{n,z} ln pi_n(z)
//
// evaluated exhaustively over the product of interior probability grids at
// resolution 0.01. Two tree shapes are supported, which is enough to keep
// the search exact and tractable: a single node (no mixture), and a star
// (root plus leaves) where, for a fixed grid point of the root
// distribution, the per-leaf blocks decouple and are scanned exhaustively.

/// Calls `f` with every interior grid point of the probability simplex
/// (all coordinates positive multiples of 0.01 summing to one). `units`
/// carries the same point in integer hundredths.
fn for_each_simplex(dim: usize, f: &mut impl FnMut(&[f64], &[u16])) {
    let mut units = vec![0u16; dim];
    let mut values = vec![0f64; dim];
    fn rec(
        pos: usize,
        remaining: u16,
        units: &mut [u16],
        values: &mut [f64],
        f: &mut impl FnMut(&[f64], &[u16]),
    ) {
        let dim = units.len();
        if pos == dim - 1 {
            units[pos] = remaining;
            values[pos] = remaining as f64 / 100.0;
            f(values, units);
            return;
        }
        // keep at least one unit for every later coordinate
        let max = remaining - (dim - 1 - pos) as u16;
        for u in 1..=max {
            units[pos] = u;
            values[pos] = u as f64 / 100.0;
            rec(pos + 1, remaining - u, units, values, f);
        }
    }
    rec(0, 100, &mut units, &mut values, f);
}

fn ln_sum(v: &[f64]) -> f64 {
    v.iter().map(|&x| x.ln()).sum()
}

fn grid_max_single(row: &[(u32, u32)], num_tags: usize, alpha: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_simplex(num_tags, &mut |theta, _| {
        let mut obj = alpha * ln_sum(theta);
        for &(tag, x) in row {
            obj += x as f64 * theta[tag as usize].ln();
        }
        if obj > best {
            best = obj;
        }
    });
    best
}

fn grid_max_star(counts: &CountMatrix, alpha: f64, beta: f64) -> f64 {
    let num_tags = counts.num_tags();
    assert!(num_tags <= 3, "star grid search supports up to 3 tags");
    let mut theta_grid: Vec<(Vec<f64>, Vec<u16>)> = Vec::new();
    for_each_simplex(num_tags, &mut |v, u| theta_grid.push((v.to_vec(), u.to_vec())));
    let theta_ln_sums: Vec<f64> = theta_grid.iter().map(|(v, _)| ln_sum(v)).collect();
    let mix_grid: Vec<(f64, f64)> = (1..=99u16)
        .map(|i| {
            let w = i as f64 / 100.0;
            (w, beta * (w.ln() + (1.0 - w).ln()))
        })
        .collect();

    let positive: Vec<Vec<(usize, f64)>> = (0..counts.num_rows())
        .map(|r| {
            counts
                .row(r)
                .iter()
                .map(|&(t, x)| (t as usize, x as f64))
                .collect()
        })
        .collect();

    // For one leaf and a fixed root point, scan the leaf's own
    // distribution and mixture weight exhaustively. The result depends on
    // the root point only through its values at the leaf's observed tags,
    // which memoizes most of the outer loop away.
    let mut memo: Vec<HashMap<Vec<u16>, f64>> = vec![HashMap::new(); positive.len()];
    let inner = |leaf: usize,
                 theta_root: &[f64],
                 key: Vec<u16>,
                 memo: &mut HashMap<Vec<u16>, f64>|
     -> f64 {
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let pos = &positive[leaf];
        let mut best = f64::NEG_INFINITY;
        for (j, (theta_leaf, _)) in theta_grid.iter().enumerate() {
            let leaf_prior = alpha * theta_ln_sums[j];
            for &(w, w_prior) in &mix_grid {
                let mut obj = leaf_prior + w_prior;
                for &(t, x) in pos {
                    obj += x * ((1.0 - w) * theta_root[t] + w * theta_leaf[t]).ln();
                }
                if obj > best {
                    best = obj;
                }
            }
        }
        memo.insert(key, best);
        best
    };

    let mut best = f64::NEG_INFINITY;
    let leaf_count = positive.len();
    for (i, (theta_root, units)) in theta_grid.iter().enumerate() {
        let mut total = alpha * theta_ln_sums[i];
        for leaf in 0..leaf_count {
            let key: Vec<u16> = positive[leaf].iter().map(|&(t, _)| units[t]).collect();
            total += inner(leaf, theta_root, key, &mut memo[leaf]);
        }
        if total > best {
            best = total;
        }
    }
    best
}

/// Exact maximum of the smoothed objective over the full product grid.
pub fn grid_max_objective(counts: &CountMatrix, tree: &GeoTree, alpha: f64, beta: f64) -> f64 {
    if tree.num_nodes() == 1 {
        return grid_max_single(counts.row(0), counts.num_tags(), alpha);
    }
    let star = (0..tree.num_leaves()).all(|r| tree.path(r).len() == 2);
    assert!(star, "grid search supports single nodes and stars");
    grid_max_star(counts, alpha, beta)
}

// ---------------------------------------------------------------------------
// Ingestion fixture: twelve records crossing every pipeline stage.

pub fn fixture_tree() -> GeoTree {
    GeoTree::build(&[
        NodeSpec {
            id: "usa".into(),
            name: "United States".into(),
            parent: None,
        },
        NodeSpec {
            id: "sfo".into(),
            name: "San Francisco".into(),
            parent: Some("usa".into()),
        },
        NodeSpec {
            id: "mission".into(),
            name: "Mission".into(),
            parent: Some("sfo".into()),
        },
        NodeSpec {
            id: "soma".into(),
            name: "SoMa".into(),
            parent: Some("sfo".into()),
        },
    ])
    .unwrap()
}

pub fn fixture_polygons() -> RegionPolygons {
    RegionPolygons::from_geojson(
        r#"{
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"leaf_id": "mission"},
                    "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}
                },
                {
                    "type": "Feature",
                    "properties": {"leaf_id": "soma"},
                    "geometry": {"type": "Polygon", "coordinates": [[[2,0],[3,0],[3,1],[2,1],[2,0]]]}
                }
            ]
        }"#,
    )
    .unwrap()
}

fn record(id: &str, user: &str, ts: &str, lon: f64, lat: f64, accuracy: i32, tags: &[&str]) -> GeoRecord {
    GeoRecord {
        id: id.into(),
        user: user.into(),
        timestamp: DateTime::parse_from_rfc3339(ts).unwrap().with_timezone(&Utc),
        location: Location::Point { lon, lat },
        accuracy,
        tags: tags.iter().map(|t| (*t).to_owned()).collect(),
    }
}

/// Twelve records: a same-day duplicate, a next-day repeat, a stoplisted
/// tag, a single-user tag, a low-accuracy record, a point outside every
/// region, and a tagless record.
pub fn fixture_records() -> Vec<GeoRecord> {
    vec![
        record("r01", "u1", "2014-03-01T10:00:00Z", 0.5, 0.5, 16, &["Graffiti"]),
        record("r02", "u1", "2014-03-01T18:30:00Z", 0.4, 0.6, 16, &["graffiti"]),
        record("r03", "u1", "2014-03-02T09:00:00Z", 0.5, 0.5, 16, &["graffiti"]),
        record("r04", "u2", "2014-03-01T12:00:00Z", 0.6, 0.4, 16, &["  GRAFFITI  "]),
        record("r05", "u1", "2014-03-01T13:00:00Z", 0.5, 0.5, 16, &["Flickr"]),
        record("r06", "u3", "2014-03-01T14:00:00Z", 0.5, 0.5, 16, &["rare"]),
        record("r07", "u1", "2014-03-01T15:00:00Z", 0.5, 0.5, 5, &["graffiti"]),
        record("r08", "u2", "2014-03-01T16:00:00Z", 10.0, 10.0, 16, &["graffiti"]),
        record("r09", "u2", "2014-03-01T17:00:00Z", 2.5, 0.5, 16, &["food"]),
        record("r10", "u3", "2014-03-02T11:00:00Z", 2.5, 0.5, 16, &["Food"]),
        record("r11", "u2", "2014-03-01T19:00:00Z", 2.5, 0.5, 16, &["graffiti"]),
        record("r12", "u4", "2014-03-01T20:00:00Z", 0.5, 0.5, 16, &[]),
    ]
}
