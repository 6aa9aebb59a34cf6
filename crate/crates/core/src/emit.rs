//! Deterministic CSV and JSON exports: generators, the two level-5 B-spline wavelets, tile point clouds
//! and frame operators.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{frame_operator, Family, FrameSystem, GenId};
use crate::group::{Elem, GroupSpec};
use crate::lattice::Domain;
use crate::numeric::C64;
use crate::tiles::{tile_iterate, TileSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct EmitFile {
    pub name: String,
    pub contents: String,
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // normalize -0
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

fn header(target: &str, hash: &str, seed: &str, columns: &str) -> String {
    format!("# tightframe {target}\n# descriptor_sha256={hash}\n# seed={seed}\n{columns}\n")
}

fn complex_rows(out: &mut String, rows: impl IntoIterator<Item = (i64, C64)>) {
    for (x, v) in rows {
        out.push_str(&format!("{x},{},{}\n", fmt_f64(v.re), fmt_f64(v.im)));
    }
}

fn file_stem(id: GenId) -> String {
    if id.m == 0 {
        format!("phi_{}", id.k)
    } else {
        format!("psi_{}_{}", id.k, id.m)
    }
}

#[derive(Serialize)]
struct GeneratorValues {
    name: String,
    support_start: i64,
    values: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct GeneratorsDoc {
    descriptor_sha256: String,
    seed: String,
    generators: Vec<GeneratorValues>,
}

/// One CSV per generator: time-domain values on Z and Z_N, frequency values on V_k1 for the torus.
/// Time-side systems also get a `generators.json` with every value list.
pub fn emit_generators(system: &FrameSystem, hash: &str, seed: &str) -> Result<Vec<EmitFile>> {
    let mut files = Vec::new();
    let mut doc = GeneratorsDoc { descriptor_sha256: hash.into(), seed: seed.into(), generators: Vec::new() };
    for id in system.generator_ids() {
        let contents = match system.group() {
            GroupSpec::Integers | GroupSpec::FiniteCyclic { .. } => {
                let g = system.time_generator(id)?;
                let mut s = header(&format!("generator {id}"), hash, seed, "x,re,im");
                complex_rows(&mut s, g.values.iter().enumerate().map(|(i, v)| (g.start + i as i64, *v)));
                doc.generators.push(GeneratorValues {
                    name: id.to_string(),
                    support_start: g.start,
                    values: g.values.iter().map(|v| [v.re, v.im]).collect(),
                });
                s
            }
            GroupSpec::Torus => {
                let (lo, hi) = match system.chain.levels[system.k1].v {
                    Domain::IntegerInterval { lo, hi } => (lo, hi),
                    _ => unreachable!("torus duals carry integer intervals"),
                };
                let mut s = header(&format!("generator {id} (frequency side)"), hash, seed, "gamma,re,im");
                let vals = (lo..=hi).map(|g| Ok((g, system.gen_hat(id, &Elem::int(g))?))).collect::<Result<Vec<_>>>()?;
                complex_rows(&mut s, vals);
                s
            }
            GroupSpec::Euclidean { .. } => {
                return Err(Error::Unsupported("generator export is provided on Z, Z_N and the torus".into()))
            }
        };
        files.push(EmitFile { name: format!("generator_{}.csv", file_stem(id)), contents });
    }
    if !doc.generators.is_empty() {
        let json = serde_json::to_string_pretty(&doc).expect("generator values serialize") + "\n";
        files.push(EmitFile { name: "generators.json".into(), contents: json });
    }
    Ok(files)
}

/// The level-5 wavelets psi^(1), psi^(2) of an order-2 B-spline system on the integers.
pub fn emit_figure1(system: &FrameSystem, hash: &str, seed: &str) -> Result<Vec<EmitFile>> {
    let ok_family = matches!(system.family, Family::BSpline { order: 2 });
    if system.group() != GroupSpec::Integers || !ok_family || !(system.k0..system.k1).contains(&5) {
        return Err(Error::precondition(
            "figure target",
            "needs an order-2 B-spline system on the integers that contains level 5",
        ));
    }
    let mut files = Vec::new();
    for m in 1..=2 {
        let id = GenId { k: 5, m };
        let g = system.time_generator(id)?;
        let mut s = header(&format!("figure1 {id}"), hash, seed, "x,re,im");
        complex_rows(&mut s, g.values.iter().enumerate().map(|(i, v)| (g.start + i as i64, *v)));
        files.push(EmitFile { name: format!("figure1_psi{m}.csv"), contents: s });
    }
    Ok(files)
}

/// Parses "a,b;c,d" into a 2x2 matrix.
pub fn parse_matrix(text: &str) -> Result<[[i64; 2]; 2]> {
    let rows: Vec<&str> = text.split(';').collect();
    let bad = || Error::Input(format!("matrix: {text:?} is not of the form a,b;c,d"));
    if rows.len() != 2 {
        return Err(bad());
    }
    let mut m = [[0i64; 2]; 2];
    for (i, r) in rows.iter().enumerate() {
        m[i] = parse_pair(r).map_err(|_| bad())?;
    }
    Ok(m)
}

/// Parses "x,y".
pub fn parse_pair(text: &str) -> Result<[i64; 2]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::Input(format!("{text:?} is not of the form x,y"));
    if parts.len() != 2 {
        return Err(bad());
    }
    Ok([parts[0].parse().map_err(|_| bad())?, parts[1].parse().map_err(|_| bad())?])
}

/// Two-column point cloud of Q^(r).
pub fn emit_tile(spec: &TileSpec, r: u32, seed: &str) -> Result<EmitFile> {
    let cloud = tile_iterate(spec, r)?;
    let key = format!("matrix={:?};eta={:?};iterations={r}", spec.a, spec.eta);
    let hash = crate::descriptor::sha256_hex(key.as_bytes());
    let mut s = header(&format!("tile {key}"), &hash, seed, "x,y");
    for p in cloud.points() {
        s.push_str(&format!("{},{}\n", fmt_f64(p[0]), fmt_f64(p[1])));
    }
    Ok(EmitFile { name: format!("tile_r{r}.csv"), contents: s })
}

/// Entries of the frame operator of a system on Z_N.
pub fn emit_frame_operator(system: &FrameSystem, hash: &str, seed: &str) -> Result<EmitFile> {
    let s = frame_operator(system)?;
    let mut out = header("frame operator", hash, seed, "row,col,re,im");
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            out.push_str(&format!("{i},{j},{},{}\n", fmt_f64(s[(i, j)].re), fmt_f64(s[(i, j)].im)));
        }
    }
    Ok(EmitFile { name: "frame_operator.csv".into(), contents: out })
}
