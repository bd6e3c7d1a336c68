//! Leaf region polygons and point-to-region assignment.
//!
//! Containment uses even-odd ray casting over every ring of a polygon, so
//! holes fall out naturally. A point exactly on a ring edge counts as
//! contained; when several regions contain a point (shared boundaries,
//! sloppy data), the lexicographically smallest leaf id wins, which keeps
//! assignment deterministic.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geotree::GeoTree;

/// A polygon as a list of closed rings (outer ring plus optional holes).
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    rings: Vec<Vec<[f64; 2]>>,
}

impl Polygon {
    /// Validates that every ring is closed and has at least three distinct
    /// vertices.
    pub fn new(rings: Vec<Vec<[f64; 2]>>, leaf: &str) -> Result<Polygon> {
        if rings.is_empty() {
            return Err(Error::MalformedPolygon {
                leaf: leaf.to_owned(),
                reason: "no rings".into(),
            });
        }
        for ring in &rings {
            if ring.len() < 4 {
                return Err(Error::MalformedPolygon {
                    leaf: leaf.to_owned(),
                    reason: format!("ring has {} vertices; need at least 4", ring.len()),
                });
            }
            if ring.first() != ring.last() {
                return Err(Error::MalformedPolygon {
                    leaf: leaf.to_owned(),
                    reason: "ring is not closed".into(),
                });
            }
        }
        Ok(Polygon { rings })
    }

    fn locate(&self, lon: f64, lat: f64) -> Containment {
        let mut inside = false;
        for ring in &self.rings {
            for edge in ring.windows(2) {
                let (a, b) = (edge[0], edge[1]);
                if on_segment(lon, lat, a, b) {
                    return Containment::Boundary;
                }
                if (a[1] > lat) != (b[1] > lat) {
                    let x_cross = a[0] + (lat - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    if lon < x_cross {
                        inside = !inside;
                    }
                }
            }
        }
        if inside {
            Containment::Inside
        } else {
            Containment::Outside
        }
    }
}

#[derive(PartialEq, Eq)]
enum Containment {
    Inside,
    Outside,
    Boundary,
}

fn on_segment(px: f64, py: f64, a: [f64; 2], b: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
    if cross != 0.0 {
        return false;
    }
    px >= a[0].min(b[0]) && px <= a[0].max(b[0]) && py >= a[1].min(b[1]) && py <= a[1].max(b[1])
}

/// Polygon sets keyed by leaf id, kept sorted by id.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RegionPolygons {
    regions: Vec<(String, Vec<Polygon>)>,
}

impl RegionPolygons {
    pub fn new(mut regions: Vec<(String, Vec<Polygon>)>) -> RegionPolygons {
        regions.sort_by(|a, b| a.0.cmp(&b.0));
        RegionPolygons { regions }
    }

    /// Parses a GeoJSON FeatureCollection whose features carry a `leaf_id`
    /// property and Polygon or MultiPolygon geometry. Features sharing a
    /// `leaf_id` are merged into one region.
    pub fn from_geojson(json: &str) -> Result<RegionPolygons> {
        let doc: Value = serde_json::from_str(json)?;
        if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(Error::MalformedInput(
                "expected a GeoJSON FeatureCollection".into(),
            ));
        }
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::MalformedInput("FeatureCollection without features".into()))?;
        let mut regions: Vec<(String, Vec<Polygon>)> = Vec::new();
        for feature in features {
            let leaf = feature
                .pointer("/properties/leaf_id")
                .and_then(Value::as_str)
                .ok_or_else(|| {
                    Error::MalformedInput("feature without a `leaf_id` property".into())
                })?
                .to_owned();
            let geometry = feature
                .get("geometry")
                .ok_or_else(|| Error::MalformedInput(format!("feature `{leaf}` has no geometry")))?;
            let gtype = geometry.get("type").and_then(Value::as_str).unwrap_or("");
            let coords = geometry.get("coordinates").ok_or_else(|| {
                Error::MalformedInput(format!("feature `{leaf}` has no coordinates"))
            })?;
            let mut polygons = Vec::new();
            match gtype {
                "Polygon" => polygons.push(parse_polygon(coords, &leaf)?),
                "MultiPolygon" => {
                    let parts = coords.as_array().ok_or_else(|| Error::MalformedPolygon {
                        leaf: leaf.clone(),
                        reason: "MultiPolygon coordinates are not an array".into(),
                    })?;
                    for part in parts {
                        polygons.push(parse_polygon(part, &leaf)?);
                    }
                }
                other => {
                    return Err(Error::MalformedPolygon {
                        leaf,
                        reason: format!("unsupported geometry type `{other}`"),
                    })
                }
            }
            match regions.iter_mut().find(|(id, _)| *id == leaf) {
                Some((_, existing)) => existing.extend(polygons),
                None => regions.push((leaf, polygons)),
            }
        }
        Ok(RegionPolygons::new(regions))
    }

    /// Checks that every referenced id is a leaf of `tree`.
    pub fn validate_against(&self, tree: &GeoTree) -> Result<()> {
        for (leaf, _) in &self.regions {
            tree.leaf_row(leaf)
                .map_err(|_| Error::UnknownLeaf(leaf.clone()))?;
        }
        Ok(())
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = &str> {
        self.regions.iter().map(|(id, _)| id.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    fn contains(&self, leaf_index: usize, lon: f64, lat: f64) -> bool {
        self.regions[leaf_index]
            .1
            .iter()
            .any(|p| p.locate(lon, lat) != Containment::Outside)
    }
}

fn parse_polygon(coords: &Value, leaf: &str) -> Result<Polygon> {
    let rings_val = coords.as_array().ok_or_else(|| Error::MalformedPolygon {
        leaf: leaf.to_owned(),
        reason: "coordinates are not an array".into(),
    })?;
    let mut rings = Vec::with_capacity(rings_val.len());
    for ring_val in rings_val {
        let points = ring_val.as_array().ok_or_else(|| Error::MalformedPolygon {
            leaf: leaf.to_owned(),
            reason: "ring is not an array".into(),
        })?;
        let mut ring = Vec::with_capacity(points.len());
        for point in points {
            let pair = point.as_array().filter(|p| p.len() >= 2).ok_or_else(|| {
                Error::MalformedPolygon {
                    leaf: leaf.to_owned(),
                    reason: "vertex is not a [lon, lat] pair".into(),
                }
            })?;
            let lon = pair[0].as_f64().ok_or_else(|| Error::MalformedPolygon {
                leaf: leaf.to_owned(),
                reason: "non-numeric coordinate".into(),
            })?;
            let lat = pair[1].as_f64().ok_or_else(|| Error::MalformedPolygon {
                leaf: leaf.to_owned(),
                reason: "non-numeric coordinate".into(),
            })?;
            ring.push([lon, lat]);
        }
        rings.push(ring);
    }
    Polygon::new(rings, leaf)
}

/// Id of the leaf region containing the point, or `None` when no region
/// does. Boundary points count as contained; among several containing
/// regions the smallest id wins (the list is kept sorted).
pub fn assign_region(lon: f64, lat: f64, polygons: &RegionPolygons) -> Option<&str> {
    (0..polygons.regions.len())
        .find(|&i| polygons.contains(i, lon, lat))
        .map(|i| polygons.regions[i].0.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> (String, Vec<Polygon>) {
        let ring = vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]];
        (id.to_owned(), vec![Polygon::new(vec![ring], id).unwrap()])
    }

    #[test]
    fn interior_point_maps_to_its_region() {
        let regions = RegionPolygons::new(vec![square("a", 0.0, 0.0, 1.0, 1.0)]);
        assert_eq!(assign_region(0.5, 0.5, &regions), Some("a"));
    }

    #[test]
    fn exterior_point_maps_to_none() {
        let regions = RegionPolygons::new(vec![square("a", 0.0, 0.0, 1.0, 1.0)]);
        assert_eq!(assign_region(2.0, 2.0, &regions), None);
        assert_eq!(assign_region(-0.1, 0.5, &regions), None);
    }

    #[test]
    fn shared_boundary_goes_to_smallest_id() {
        let regions = RegionPolygons::new(vec![
            square("b", 1.0, 0.0, 2.0, 1.0),
            square("a", 0.0, 0.0, 1.0, 1.0),
        ]);
        // x = 1 is the shared edge.
        assert_eq!(assign_region(1.0, 0.5, &regions), Some("a"));
        // A corner is boundary too.
        assert_eq!(assign_region(1.0, 1.0, &regions), Some("a"));
    }

    #[test]
    fn holes_are_outside() {
        let outer = vec![[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0], [0.0, 0.0]];
        let hole = vec![[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0], [1.0, 1.0]];
        let poly = Polygon::new(vec![outer, hole], "a").unwrap();
        let regions = RegionPolygons::new(vec![("a".into(), vec![poly])]);
        assert_eq!(assign_region(2.0, 2.0, &regions), None);
        assert_eq!(assign_region(0.5, 0.5, &regions), Some("a"));
        // On the hole edge: boundary counts as contained.
        assert_eq!(assign_region(1.0, 2.0, &regions), Some("a"));
    }

    #[test]
    fn concave_polygon_ray_casting() {
        // A "U" shape; the notch between the arms is outside.
        let ring = vec![
            [0.0, 0.0],
            [5.0, 0.0],
            [5.0, 4.0],
            [4.0, 4.0],
            [4.0, 1.0],
            [1.0, 1.0],
            [1.0, 4.0],
            [0.0, 4.0],
            [0.0, 0.0],
        ];
        let poly = Polygon::new(vec![ring], "u").unwrap();
        let regions = RegionPolygons::new(vec![("u".into(), vec![poly])]);
        assert_eq!(assign_region(2.5, 2.5, &regions), None);
        assert_eq!(assign_region(0.5, 2.5, &regions), Some("u"));
        assert_eq!(assign_region(4.5, 2.5, &regions), Some("u"));
        assert_eq!(assign_region(2.5, 0.5, &regions), Some("u"));
    }

    #[test]
    fn malformed_rings_are_rejected() {
        let open = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(matches!(
            Polygon::new(vec![open], "x"),
            Err(Error::MalformedPolygon { .. })
        ));
        let degenerate = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]];
        assert!(matches!(
            Polygon::new(vec![degenerate], "x"),
            Err(Error::MalformedPolygon { .. })
        ));
    }

    #[test]
    fn geojson_parsing_covers_polygon_and_multipolygon() {
        let json = r#"{
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"leaf_id": "mission"},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]
                    }
                },
                {
                    "type": "Feature",
                    "properties": {"leaf_id": "islands"},
                    "geometry": {
                        "type": "MultiPolygon",
                        "coordinates": [
                            [[[2,0],[3,0],[3,1],[2,1],[2,0]]],
                            [[[4,0],[5,0],[5,1],[4,1],[4,0]]]
                        ]
                    }
                }
            ]
        }"#;
        let regions = RegionPolygons::from_geojson(json).unwrap();
        assert_eq!(regions.leaf_ids().collect::<Vec<_>>(), ["islands", "mission"]);
        assert_eq!(assign_region(0.5, 0.5, &regions), Some("mission"));
        assert_eq!(assign_region(2.5, 0.5, &regions), Some("islands"));
        assert_eq!(assign_region(4.5, 0.5, &regions), Some("islands"));
        assert_eq!(assign_region(3.5, 0.5, &regions), None);

        assert!(RegionPolygons::from_geojson("{\"type\": \"Feature\"}").is_err());
    }
}
