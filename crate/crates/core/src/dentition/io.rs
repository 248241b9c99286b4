//! On-disk dentitions: a JSON manifest listing `{fdi, role, file}` entries
//! plus one ASCII PLY point file per tooth, paths relative to the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dentition::fdi::Fdi;
use crate::dentition::tooth::{Dentition, Frame, Role, Tooth};
use crate::error::{Error, Result};
use crate::point::Point3;
use crate::scalar::Real;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToothEntry {
    pub fdi: u32,
    pub role: Role,
    pub file: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pseudo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DentitionManifest {
    #[serde(default)]
    pub frame: Frame,
    pub teeth: Vec<ToothEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

/// Writes an ASCII PLY file with `x y z [nx ny nz]` double properties.
pub fn write_ply<T: Real>(
    path: &Path,
    points: &[Point3<T>],
    normals: Option<&[Point3<T>]>,
) -> Result<()> {
    let mut s = String::with_capacity(points.len() * 64 + 200);
    s.push_str("ply\nformat ascii 1.0\n");
    s.push_str(&format!("element vertex {}\n", points.len()));
    for p in ["x", "y", "z"] {
        s.push_str(&format!("property double {p}\n"));
    }
    if normals.is_some() {
        for p in ["nx", "ny", "nz"] {
            s.push_str(&format!("property double {p}\n"));
        }
    }
    s.push_str("end_header\n");
    for (i, p) in points.iter().enumerate() {
        s.push_str(&format!("{} {} {}", p[0], p[1], p[2]));
        if let Some(ns) = normals {
            let n = ns[i];
            s.push_str(&format!(" {} {} {}", n[0], n[1], n[2]));
        }
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

type PlyCloud<T> = (Vec<Point3<T>>, Option<Vec<Point3<T>>>);

/// Reads an ASCII PLY vertex list. Unknown vertex properties are ignored;
/// `x y z` are required, `nx ny nz` optional.
pub fn read_ply<T: Real>(path: &Path) -> Result<PlyCloud<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let err = |line: usize, msg: &str| Error::parse(path, line, msg);

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(err(1, "missing 'ply' magic")),
    }
    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut header_end = None;
    for (ln, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", ..] => return Err(err(ln, "only ascii PLY is supported")),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse().map_err(|_| err(ln, "bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(err(ln, "list properties on vertices are not supported"));
                }
            }
            ["property", _ty, name] => {
                if in_vertex {
                    props.push((*name).to_string());
                }
            }
            ["end_header"] => {
                header_end = Some(ln);
                break;
            }
            _ => return Err(err(ln, "unrecognized header line")),
        }
    }
    let header_end = header_end.ok_or_else(|| err(1, "missing end_header"))?;
    let count = count.ok_or_else(|| err(header_end, "no vertex element"))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(err(header_end, "vertex element lacks x/y/z")),
    };
    let nidx = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };

    let mut points = Vec::with_capacity(count);
    let mut normals = nidx.map(|_| Vec::with_capacity(count));
    for k in 0..count {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(header_end + k + 1, &format!("expected {count} vertices, found {k}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() < props.len() {
            return Err(err(ln, &format!("expected {} values, found {}", props.len(), vals.len())));
        }
        let num = |i: usize| -> Result<T> {
            vals[i]
                .parse::<T>()
                .map_err(|_| err(ln, &format!("bad number '{}'", vals[i])))
        };
        points.push([num(xi)?, num(yi)?, num(zi)?]);
        if let (Some(ns), Some([a, b, c])) = (normals.as_mut(), nidx) {
            ns.push([num(a)?, num(b)?, num(c)?]);
        }
    }
    Ok((points, normals))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `dir/manifest.json` and `dir/<fdi>.ply` for every tooth.
pub fn write_dentition<T: Real>(
    dentition: &Dentition<T>,
    dir: &Path,
    meta: Option<serde_json::Value>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(dentition.len());
    for t in dentition.teeth() {
        let file = format!("{}.ply", t.fdi);
        write_ply(&dir.join(&file), t.points(), t.normals())?;
        entries.push(ToothEntry {
            fdi: t.fdi.code(),
            role: t.role,
            file,
            pseudo: t.pseudo,
        });
    }
    let manifest = DentitionManifest {
        frame: dentition.frame,
        teeth: entries,
        meta,
    };
    let path = dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}

/// Reads a dentition from a manifest path or from a directory containing
/// `manifest.json`.
pub fn read_dentition<T: Real>(path: &Path) -> Result<Dentition<T>> {
    read_dentition_with_meta(path).map(|(d, _)| d)
}

pub fn read_dentition_with_meta<T: Real>(
    path: &Path,
) -> Result<(Dentition<T>, Option<serde_json::Value>)> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    };
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DentitionManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: manifest_path.clone(),
        source: e,
    })?;
    let mut d = Dentition::default();
    d.frame = manifest.frame;
    for entry in &manifest.teeth {
        let fdi = Fdi::new(entry.fdi)?;
        let (points, normals) = read_ply(&base.join(&entry.file))?;
        let mut tooth = Tooth::with_normals(fdi, points, normals)?.with_role(entry.role);
        tooth.pseudo = entry.pseudo;
        d.insert(tooth)?;
    }
    Ok((d, manifest.meta))
}
