//! Reference manifolds and the fixture file loader.
//!
//! Fixture files are flat `key = value` text:
//!
//! ```text
//! name = warped
//! model = box            # or sphere
//! charts = 1
//! chart0.lo = 0
//! chart0.hi = 1
//! chart0.nodes = 64
//! chart0.periodic = false
//! chart0.metric = exp-warped-1d
//! chart0.map = euclidean # or sphere, with chart0.rotation = nine numbers
//! chart0.override = h.bin
//! ```
//!
//! An override file replaces the closed-form metric by samples: the upper-triangle
//! components one after another, each row-major over the chart grid, little-endian `f64`.

use std::f64::consts::PI;
use std::path::Path;

use super::chart::{Atlas, Chart, ChartMap, ChartMetric, ModelSpace};
use super::fields::pair_count;
use super::metric::MetricPreset;
use super::GeometryError;
use crate::grid::{Axis, Grid};
use crate::kv;

/// Colatitude cut-off of both sphere charts.
pub const SPHERE_CAP_OFFSET: f64 = 0.3;

/// Rotation taking the second sphere chart's poles onto the `x` axis.
pub const SPHERE_SECOND_ROTATION: [[f64; 3]; 3] = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];

pub const NAMES: [&str; 5] = ["flat-torus-1d", "flat-torus-2d", "sphere", "exp-warped-1d", "interval"];

fn single(name: &str, axes: Vec<Axis>, metric: MetricPreset) -> Result<Atlas, GeometryError> {
    let grid = Grid::new(axes.clone())?;
    Ok(Atlas {
        name: name.to_string(),
        charts: vec![Chart {
            id: 0,
            name: name.to_string(),
            grid,
            map: ChartMap::Euclidean,
            metric: ChartMetric::Preset(metric),
            overlaps: vec![],
        }],
        unit_volume: metric == MetricPreset::Flat,
        model: ModelSpace::Box { axes },
    })
}

/// Flat unit `d`-torus, one periodic chart.
pub fn flat_torus(d: usize, n: usize) -> Result<Atlas, GeometryError> {
    let name = if d == 1 { "flat-torus-1d" } else { "flat-torus-2d" };
    single(name, (0..d).map(|_| Axis::new(0.0, 1.0, n, true)).collect(), MetricPreset::Flat)
}

/// Flat closed segment.
pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Atlas, GeometryError> {
    single("interval", vec![Axis::new(lo, hi, n, false)], MetricPreset::Flat)
}

/// `[0, 1]` with `h = e^{2z}`.
pub fn exp_warped_1d(n: usize) -> Result<Atlas, GeometryError> {
    single("exp-warped-1d", vec![Axis::new(0.0, 1.0, n, false)], MetricPreset::ExpWarped1d)
}

/// Round unit sphere, two rotated colatitude/longitude charts with the caps cut off.
pub fn sphere(n: usize) -> Result<Atlas, GeometryError> {
    let axes = || {
        vec![
            Axis::new(SPHERE_CAP_OFFSET, PI - SPHERE_CAP_OFFSET, n, false),
            Axis::new(0.0, 2.0 * PI, n, true),
        ]
    };
    let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let charts = [identity, SPHERE_SECOND_ROTATION]
        .into_iter()
        .enumerate()
        .map(|(id, rotation)| {
            Ok(Chart {
                id,
                name: format!("sphere-{}", if id == 0 { "z" } else { "x" }),
                grid: Grid::new(axes())?,
                map: ChartMap::Sphere { rotation },
                metric: ChartMetric::Preset(MetricPreset::SpherePolar),
                overlaps: vec![1 - id],
            })
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    Ok(Atlas { name: "sphere".into(), charts, unit_volume: false, model: ModelSpace::UnitSphere })
}

pub fn by_name(name: &str, n: usize) -> Result<Atlas, GeometryError> {
    match name {
        "flat-torus-1d" => flat_torus(1, n),
        "flat-torus-2d" => flat_torus(2, n),
        "sphere" => sphere(n),
        "exp-warped-1d" => exp_warped_1d(n),
        "interval" => interval(0.0, 1.0, n),
        other => Err(GeometryError::Fixture(format!("unknown fixture {other:?}"))),
    }
}

/// A fixture name, or a path to a fixture file.
pub fn resolve(spec: &str, resolution: Option<usize>) -> Result<Atlas, GeometryError> {
    if NAMES.contains(&spec) {
        return by_name(spec, resolution.unwrap_or(128));
    }
    load(Path::new(spec), resolution)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GeometryError + '_ {
    move |source| GeometryError::Io { path: path.display().to_string(), source }
}

/// Load a fixture file; `resolution` overrides every per-axis node count.
pub fn load(path: &Path, resolution: Option<usize>) -> Result<Atlas, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse(&text, dir, resolution)
}

pub fn parse(text: &str, dir: &Path, resolution: Option<usize>) -> Result<Atlas, GeometryError> {
    let map = kv::parse(text).map_err(GeometryError::Fixture)?;
    let get = |k: &str| map.get(k).ok_or_else(|| GeometryError::Fixture(format!("missing key {k}")));
    let count: usize = get("charts")?
        .parse()
        .map_err(|_| GeometryError::Fixture("charts must be a count".into()))?;
    if count == 0 {
        return Err(GeometryError::Fixture("no charts".into()));
    }
    let fx = GeometryError::Fixture;
    let mut charts = Vec::with_capacity(count);
    for id in 0..count {
        let key = |s: &str| format!("chart{id}.{s}");
        let lo: Vec<f64> = kv::list(get(&key("lo"))?).map_err(fx)?;
        let hi: Vec<f64> = kv::list(get(&key("hi"))?).map_err(fx)?;
        let nodes: Vec<usize> = kv::list(get(&key("nodes"))?).map_err(fx)?;
        let periodic: Vec<bool> = kv::list(get(&key("periodic"))?).map_err(fx)?;
        let d = lo.len();
        if hi.len() != d || nodes.len() != d || periodic.len() != d {
            return Err(GeometryError::Fixture(format!("chart{id}: axis lists differ in length")));
        }
        let axes = (0..d)
            .map(|k| Axis::new(lo[k], hi[k], resolution.unwrap_or(nodes[k]), periodic[k]))
            .collect();
        let grid = Grid::new(axes)?;
        let preset_name = get(&key("metric"))?;
        let preset = MetricPreset::parse(preset_name)
            .ok_or_else(|| GeometryError::Fixture(format!("unknown metric preset {preset_name:?}")))?;
        let metric = match map.get(&key("override")) {
            Some(file) => ChartMetric::Sampled(read_override(&dir.join(file), d, grid.len())?),
            None => ChartMetric::Preset(preset),
        };
        let chart_map = match map.get(&key("map")).map(String::as_str).unwrap_or("euclidean") {
            "euclidean" => ChartMap::Euclidean,
            "sphere" => {
                let r: Vec<f64> = match map.get(&key("rotation")) {
                    Some(v) => kv::list(v).map_err(fx)?,
                    None => vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                };
                if r.len() != 9 || d != 2 {
                    return Err(GeometryError::Fixture(format!("chart{id}: sphere map needs d = 2 and 9 rotation entries")));
                }
                ChartMap::Sphere { rotation: [[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]] }
            }
            other => return Err(GeometryError::Fixture(format!("unknown chart map {other:?}"))),
        };
        charts.push(Chart {
            id,
            name: format!("chart{id}"),
            grid,
            map: chart_map,
            metric,
            overlaps: (0..count).filter(|&o| o != id).collect(),
        });
    }
    let model = match map.get("model").map(String::as_str).unwrap_or("box") {
        "box" => ModelSpace::Box { axes: charts[0].grid.axes().to_vec() },
        "sphere" => ModelSpace::UnitSphere,
        other => return Err(GeometryError::Fixture(format!("unknown model {other:?}"))),
    };
    let unit_volume = charts.iter().all(|c| matches!(c.metric, ChartMetric::Preset(MetricPreset::Flat)));
    Ok(Atlas {
        name: map.get("name").cloned().unwrap_or_else(|| "custom".into()),
        charts,
        unit_volume,
        model,
    })
}

fn read_override(path: &Path, d: usize, n: usize) -> Result<Vec<Vec<f64>>, GeometryError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let comps = pair_count(d);
    if bytes.len() != comps * n * 8 {
        return Err(GeometryError::Fixture(format!(
            "{}: expected {} bytes of metric samples, found {}",
            path.display(),
            comps * n * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(values.chunks(n).map(<[f64]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_fixtures_build() {
        for name in NAMES {
            let atlas = by_name(name, 16).unwrap();
            assert!(atlas.covers(200, 1), "{name}");
        }
        assert!(by_name("klein-bottle", 16).is_err());
    }

    #[test]
    fn loads_text_with_binary_override() {
        let dir = std::env::temp_dir().join(format!("chartflow-fixture-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let samples: Vec<u8> = (0..16).flat_map(|i| (1.0 + i as f64 * 0.01).to_le_bytes()).collect();
        std::fs::write(dir.join("h.bin"), samples).unwrap();
        let text = "charts = 1\nchart0.lo = 0\nchart0.hi = 1\nchart0.nodes = 16\n\
                    chart0.periodic = false\nchart0.metric = flat\nchart0.override = h.bin\n";
        std::fs::write(dir.join("m.kv"), text).unwrap();
        let atlas = load(&dir.join("m.kv"), None).unwrap();
        let m = atlas.charts[0].metric_field().unwrap();
        assert!((m.h[0][3] - 1.03).abs() < 1e-15);
        assert!(load(&dir.join("m.kv"), Some(32)).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
