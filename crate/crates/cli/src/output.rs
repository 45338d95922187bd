//! Report and field persistence.  Every float is written with 17
//! significant digits, which round-trips `f64` exactly.

use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use critnls::{Domain, Field};

use crate::RunError;

/// Pretty printer whose floats are `{:.16e}`.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("reports serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}

fn coordinate_header(d: &Domain) -> Vec<&'static str> {
    if d.is_radial() {
        vec!["r"]
    } else {
        vec!["x", "y", "z"]
    }
}

/// `r,value` on radial grids, `x,y,z,value` on the box.  `None` values are
/// written as empty cells.
pub fn field_csv(d: &Domain, values: &[Option<f64>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = coordinate_header(d);
    header.push("value");
    w.write_record(&header).expect("in-memory write");
    for (i, v) in values.iter().enumerate() {
        let mut row: Vec<String> = if d.is_radial() {
            vec![format!("{:.16e}", d.radius()[i])]
        } else {
            d.coordinates(i).iter().map(|x| format!("{x:.16e}")).collect()
        };
        row.push(v.map_or(String::new(), |v| format!("{v:.16e}")));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// CSV dump, plus a raw little-endian `f64` file when `binary` is set.
pub fn dump_field(dir: &Path, name: &str, field: &Field, binary: bool) -> Result<(), RunError> {
    let values: Vec<Option<f64>> = field.values().iter().copied().map(Some).collect();
    write_text(&dir.join(format!("{name}.csv")), &field_csv(field.domain(), &values))?;
    if binary {
        let bytes: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(format!("{name}.f64"));
        std::fs::write(&path, bytes).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Reload a dump written by [`dump_field`], checking that its nodes are the
/// nodes of `d`.
pub fn load_field(dir: &Path, name: &str, d: &Arc<Domain>) -> Result<Field, RunError> {
    let path = dir.join(format!("{name}.csv"));
    let bad = |m: String| RunError::Io(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(&path).map_err(|e| bad(e.to_string()))?;
    let columns = coordinate_header(d).len();
    let mut values = Vec::with_capacity(d.len());
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if i >= d.len() || row.len() != columns + 1 {
            return Err(bad(format!("row {i} does not match the grid")));
        }
        let parse = |k: usize| row[k].parse::<f64>().map_err(|e| bad(format!("row {i}: {e}")));
        let expected: Vec<f64> = if d.is_radial() { vec![d.radius()[i]] } else { d.coordinates(i).to_vec() };
        for (k, x) in expected.iter().enumerate() {
            if parse(k)? != *x {
                return Err(bad(format!("node {i} differs from the configured grid")));
            }
        }
        values.push(parse(columns)?);
    }
    if values.len() != d.len() {
        return Err(bad(format!("{} rows for {} nodes", values.len(), d.len())));
    }
    Field::new(d, values).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use critnls::{build_domain, GridKind};

    #[test]
    fn floats_carry_seventeen_digits() {
        let s = to_json(&serde_json::json!({ "x": 0.1, "y": [1.0, -2.5e-300], "z": f64::NAN }));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.5000000000000000e-300"));
        assert!(s.contains("\"z\": null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn field_dump_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for (kind, n) in [(GridKind::RadialLogSpaced, 300), (GridKind::BoxUniform, 16)] {
            let d = build_domain(3, kind, 5.0, n).unwrap();
            let f = Field::new(&d, (0..d.len()).map(|i| (i as f64 * 0.37).sin() / 3.0).collect()).unwrap();
            dump_field(dir.path(), "f", &f, true).unwrap();
            let g = load_field(dir.path(), "f", &d).unwrap();
            assert_eq!(f.values(), g.values());
            assert_eq!(std::fs::metadata(dir.path().join("f.f64")).unwrap().len(), 8 * d.len() as u64);
        }
    }

    #[test]
    fn foreign_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = build_domain(3, GridKind::RadialLogSpaced, 5.0, 300).unwrap();
        dump_field(dir.path(), "f", &Field::zeros(&d), false).unwrap();
        let other = build_domain(3, GridKind::RadialLogSpaced, 6.0, 300).unwrap();
        assert!(load_field(dir.path(), "f", &other).is_err());
    }
}
