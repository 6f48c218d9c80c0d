//! Binary little-endian PLY reader and writer for 3D Gaussian Splatting scenes.

use super::{sh_dc_to_rgb, GaussianScene, IngestError};

/// Number of higher-order SH coefficients in a degree-3 export.
pub const SH_REST_LEN: usize = 45;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<(String, ScalarType)>,
}

impl Element {
    fn stride(&self) -> usize {
        self.properties.iter().map(|(_, t)| t.size()).sum()
    }
}

struct Header {
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, IngestError> {
    let mut elements: Vec<Element> = Vec::new();
    let mut pos = 0;
    let mut line_no = 0;
    let mut saw_format = false;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(IngestError::Header { line: line_no + 1, message: "missing end_header".into() })?;
        let raw = &bytes[pos..pos + end];
        pos += end + 1;
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| IngestError::Header { line: line_no, message: "header is not UTF-8".into() })?
            .trim_end_matches('\r');
        let bad = |message: String| IngestError::Header { line: line_no, message };
        let words: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(bad(format!("expected magic 'ply', found {line:?}")));
            }
            continue;
        }
        match words.first().copied() {
            Some("format") => {
                if words.get(1) != Some(&"binary_little_endian") {
                    return Err(bad(format!("unsupported format {line:?}; only binary_little_endian is read")));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let [_, name, count] = words[..] else {
                    return Err(bad(format!("malformed element line {line:?}")));
                };
                let count = count.parse().map_err(|_| bad(format!("bad element count in {line:?}")))?;
                elements.push(Element { name: name.to_owned(), count, properties: Vec::new() });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| bad("property before any element".into()))?;
                if words.get(1) == Some(&"list") {
                    return Err(bad(format!("list properties are not supported: {line:?}")));
                }
                let [_, ty, name] = words[..] else {
                    return Err(bad(format!("malformed property line {line:?}")));
                };
                let ty = ScalarType::parse(ty).ok_or_else(|| bad(format!("unknown property type {ty:?}")))?;
                element.properties.push((name.to_owned(), ty));
            }
            Some("end_header") => break,
            _ => return Err(bad(format!("unrecognised header line {line:?}"))),
        }
    }
    if !saw_format {
        return Err(IngestError::Header { line: line_no, message: "no format line before end_header".into() });
    }
    Ok(Header { elements, body_offset: pos })
}

/// Parses a 3DGS PLY. Cameras are left empty.
pub fn parse_gaussian_ply(scene_id: &str, bytes: &[u8]) -> Result<GaussianScene, IngestError> {
    let header = parse_header(bytes)?;
    let mut offset = header.body_offset;
    let mut vertex = None;
    for el in &header.elements {
        if el.name == "vertex" {
            vertex = Some(el);
            break;
        }
        offset += el.count * el.stride();
    }
    let vertex = vertex.ok_or_else(|| IngestError::Schema("no vertex element".into()))?;
    if vertex.count == 0 {
        return Err(IngestError::Schema("scene has no primitives".into()));
    }

    let mut columns = std::collections::HashMap::new();
    let mut col_offset = 0;
    for (name, ty) in &vertex.properties {
        columns.insert(name.as_str(), (col_offset, *ty));
        col_offset += ty.size();
    }
    let stride = col_offset;
    let body = bytes.get(offset..).unwrap_or(&[]);
    if body.len() < vertex.count * stride {
        return Err(IngestError::Truncated {
            declared: vertex.count,
            available: body.len() / stride.max(1),
        });
    }

    let require = |name: &str| {
        columns.get(name).copied().ok_or_else(|| IngestError::Schema(format!("missing mandatory property {name}")))
    };
    let optional = |names: &[String]| -> Option<Vec<(usize, ScalarType)>> {
        names.iter().map(|n| columns.get(n.as_str()).copied()).collect()
    };
    let names = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();

    let xyz = [require("x")?, require("y")?, require("z")?];
    let dc = optional(&names("f_dc_", 3));
    let rgb = optional(&["red".into(), "green".into(), "blue".into()]);
    if dc.is_none() && rgb.is_none() {
        return Err(IngestError::Schema("missing mandatory property f_dc_0..2 (or red/green/blue)".into()));
    }
    let opacity = columns.get("opacity").copied();
    let scales = optional(&names("scale_", 3));
    let rots = optional(&names("rot_", 4));
    let rest_len = (0..).take_while(|i| columns.contains_key(format!("f_rest_{i}").as_str())).count();
    let rest = if rest_len > 0 { optional(&names("f_rest_", rest_len)) } else { None };

    let n = vertex.count;
    let read = |row: &[u8], (o, t): (usize, ScalarType)| t.read(&row[o..]);
    let mut scene = GaussianScene {
        scene_id: scene_id.to_owned(),
        centers: Vec::with_capacity(n),
        colors: Vec::with_capacity(n),
        sh_dc: dc.as_ref().map(|_| Vec::with_capacity(n)),
        opacity: opacity.map(|_| Vec::with_capacity(n)),
        scales: scales.as_ref().map(|_| Vec::with_capacity(n)),
        rotations: rots.as_ref().map(|_| Vec::with_capacity(n)),
        sh_rest: rest.as_ref().map(|_| Vec::with_capacity(n)),
        cameras: Vec::new(),
    };
    for i in 0..n {
        let row = &body[i * stride..(i + 1) * stride];
        let center = [read(row, xyz[0]), read(row, xyz[1]), read(row, xyz[2])];
        if center.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::Domain(format!("vertex {i} has a non-finite center")));
        }
        scene.centers.push(center);
        if let Some(dc) = &dc {
            let c = [read(row, dc[0]), read(row, dc[1]), read(row, dc[2])];
            scene.colors.push(sh_dc_to_rgb(c)?);
            scene.sh_dc.as_mut().expect("dc present").push(c);
        } else if let Some(rgb) = &rgb {
            let raw = [read(row, rgb[0]), read(row, rgb[1]), read(row, rgb[2])];
            let scale = if rgb[0].1 == ScalarType::U8 { 1.0 / 255.0 } else { 1.0 };
            scene.colors.push([raw[0] * scale, raw[1] * scale, raw[2] * scale]);
        }
        if let (Some(col), Some(out)) = (opacity, scene.opacity.as_mut()) {
            out.push(read(row, col));
        }
        if let (Some(cols), Some(out)) = (&scales, scene.scales.as_mut()) {
            out.push([read(row, cols[0]), read(row, cols[1]), read(row, cols[2])]);
        }
        if let (Some(cols), Some(out)) = (&rots, scene.rotations.as_mut()) {
            let q = [read(row, cols[0]), read(row, cols[1]), read(row, cols[2]), read(row, cols[3])];
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(IngestError::Domain(format!("vertex {i} has a degenerate rotation")));
            }
            out.push([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]);
        }
        if let (Some(cols), Some(out)) = (&rest, scene.sh_rest.as_mut()) {
            out.push(cols.iter().map(|&c| read(row, c)).collect());
        }
    }
    scene.validate()?;
    Ok(scene)
}

/// Serialises a scene as binary little-endian float32 PLY.
///
/// Scenes with SH DC coefficients are written as `f_dc_*`; scenes built
/// from direct colors are written as float `red/green/blue`.
pub fn write_gaussian_ply(scene: &GaussianScene) -> Vec<u8> {
    let mut props: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    if scene.sh_dc.is_some() {
        props.extend((0..3).map(|i| format!("f_dc_{i}")));
    } else {
        props.extend(["red", "green", "blue"].iter().map(|s| s.to_string()));
    }
    let rest_len = scene.sh_rest.as_ref().and_then(|r| r.first()).map_or(0, Vec::len);
    props.extend((0..rest_len).map(|i| format!("f_rest_{i}")));
    if scene.opacity.is_some() {
        props.push("opacity".into());
    }
    if scene.scales.is_some() {
        props.extend((0..3).map(|i| format!("scale_{i}")));
    }
    if scene.rotations.is_some() {
        props.extend((0..4).map(|i| format!("rot_{i}")));
    }

    let mut out = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", scene.len());
    for p in &props {
        out.push_str(&format!("property float {p}\n"));
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    let mut push = |v: f64| bytes.extend_from_slice(&(v as f32).to_le_bytes());
    for i in 0..scene.len() {
        scene.centers[i].iter().for_each(|&v| push(v));
        match &scene.sh_dc {
            Some(dc) => dc[i].iter().for_each(|&v| push(v)),
            None => scene.colors[i].iter().for_each(|&v| push(v)),
        }
        if let Some(rest) = &scene.sh_rest {
            rest[i].iter().for_each(|&v| push(v));
        }
        if let Some(o) = &scene.opacity {
            push(o[i]);
        }
        if let Some(s) = &scene.scales {
            s[i].iter().for_each(|&v| push(v));
        }
        if let Some(r) = &scene.rotations {
            r[i].iter().for_each(|&v| push(v));
        }
    }
    bytes
}
