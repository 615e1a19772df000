//! JSON with every float printed to 17 significant digits, so identical
//! values always serialize to identical bytes.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::{create, format_err, io_err, open};
use crate::error::Result;

struct FixedFloats<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident $(, $arg:ident : $ty:ty)*;)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        begin_object_value;
        end_object_value;
    }
}

/// Pretty JSON text ending in a newline. Non-finite floats become `null`.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(to_json_pretty(value).as_bytes())
        .map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn from_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| format_err(path, e.to_string()))
}
