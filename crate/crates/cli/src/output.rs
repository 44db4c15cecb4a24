//! Structured output: JSON with 17 significant digits per float, CSV with a
//! `# {config}` first line, and plain text.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

/// Wraps a formatter so that every float is written as `{:.16e}`.
struct Precise<F>(F);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Precise<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{}", float(v))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{}", float(f64::from(v)))
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// A float with 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn serialize_with<T: Serialize, F: Formatter>(value: &T, fmt: F) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(fmt));
    value.serialize(&mut ser).map_err(io::Error::other)?;
    Ok(buf)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> io::Result<String> {
    let mut bytes = serialize_with(value, PrettyFormatter::new())?;
    bytes.push(b'\n');
    Ok(String::from_utf8(bytes).expect("serde_json emits UTF-8"))
}

pub fn to_json_compact<T: Serialize>(value: &T) -> io::Result<String> {
    Ok(
        String::from_utf8(serialize_with(value, CompactFormatter)?)
            .expect("serde_json emits UTF-8"),
    )
}

/// CSV text preceded by `# {config}`.
pub fn to_csv<C: Serialize>(
    config: &C,
    header: &[&str],
    rows: &[Vec<String>],
) -> io::Result<String> {
    let mut out = format!("# {}\n", to_json_compact(config)?);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io::Error::other)?;
    for r in rows {
        w.write_record(r).map_err(io::Error::other)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| io::Error::other(e.to_string()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv emits UTF-8"));
    Ok(out)
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
