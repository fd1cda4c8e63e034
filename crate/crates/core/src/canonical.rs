//! Canonical byte encoding used for stage hashing.
//!
//! The encoding is compact JSON: object keys sorted by their UTF-8 bytes, no
//! insignificant whitespace, integers in plain decimal and every real number
//! written with 17 significant digits in exponent form (`{:.16e}`, e.g.
//! `2.5000000000000000e-1`). Negative zero is written as positive zero.
//! The exact byte layout is documented in `docs/canonical-serialization.md`.

use std::fmt::Write;

/// Formats a finite real with 17 significant digits. Round-trips every `f64`.
pub fn real(x: f64) -> String {
    debug_assert!(x.is_finite(), "non-finite value in canonical encoding");
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Incremental writer for one canonical JSON value.
#[derive(Default)]
pub struct CanonicalWriter {
    buf: String,
}

impl CanonicalWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_string(self) -> String {
        self.buf
    }

    pub fn raw(&mut self, s: &str) -> &mut Self {
        self.buf.push_str(s);
        self
    }

    pub fn real(&mut self, x: f64) -> &mut Self {
        debug_assert!(x.is_finite(), "non-finite value in canonical encoding");
        let x = if x == 0.0 { 0.0 } else { x };
        write!(self.buf, "{x:.16e}").expect("write to String");
        self
    }

    pub fn uint(&mut self, v: u64) -> &mut Self {
        write!(self.buf, "{v}").expect("write to String");
        self
    }

    /// Writes a JSON string. Only ASCII identifiers are ever encoded, so the
    /// escaping covers quotes, backslashes and control characters.
    pub fn string(&mut self, s: &str) -> &mut Self {
        self.buf.push('"');
        for c in s.chars() {
            match c {
                '"' => self.buf.push_str("\\\""),
                '\\' => self.buf.push_str("\\\\"),
                c if (c as u32) < 0x20 => {
                    write!(self.buf, "\\u{:04x}", c as u32).expect("write to String");
                }
                c => self.buf.push(c),
            }
        }
        self.buf.push('"');
        self
    }

    /// Writes an object whose fields are produced by `fields`. Keys are sorted
    /// here, so callers may emit them in any order.
    pub fn object<F>(&mut self, fields: F) -> &mut Self
    where
        F: FnOnce(&mut ObjectFields),
    {
        let mut entries = ObjectFields::default();
        fields(&mut entries);
        entries.0.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
        self.buf.push('{');
        for (i, (key, value)) in entries.0.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            self.string(key);
            self.buf.push(':');
            self.buf.push_str(value);
        }
        self.buf.push('}');
        self
    }

    /// Writes an object whose fields the caller emits in ascending key order.
    /// Cheaper than [`CanonicalWriter::object`]; ordering is checked in debug builds.
    pub fn ordered_object<F>(&mut self, fields: F) -> &mut Self
    where
        F: FnOnce(&mut OrderedFields<'_>),
    {
        self.buf.push('{');
        let mut o = OrderedFields { w: self, last: None };
        fields(&mut o);
        self.buf.push('}');
        self
    }

    pub fn array<I, F>(&mut self, items: I, mut each: F) -> &mut Self
    where
        I: IntoIterator,
        F: FnMut(&mut CanonicalWriter, I::Item),
    {
        self.buf.push('[');
        for (i, item) in items.into_iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            each(self, item);
        }
        self.buf.push(']');
        self
    }
}

/// Collected `(key, encoded value)` pairs of an object under construction.
#[derive(Default)]
pub struct ObjectFields(Vec<(String, String)>);

impl ObjectFields {
    pub fn field<F>(&mut self, key: impl Into<String>, value: F) -> &mut Self
    where
        F: FnOnce(&mut CanonicalWriter),
    {
        let mut w = CanonicalWriter::new();
        value(&mut w);
        self.0.push((key.into(), w.into_string()));
        self
    }

    pub fn real(&mut self, key: impl Into<String>, x: f64) -> &mut Self {
        self.field(key, |w| {
            w.real(x);
        })
    }

    pub fn uint(&mut self, key: impl Into<String>, v: u64) -> &mut Self {
        self.field(key, |w| {
            w.uint(v);
        })
    }

    pub fn string(&mut self, key: impl Into<String>, s: &str) -> &mut Self {
        self.field(key, |w| {
            w.string(s);
        })
    }
}

/// Field emitter for [`CanonicalWriter::ordered_object`].
pub struct OrderedFields<'a> {
    w: &'a mut CanonicalWriter,
    last: Option<String>,
}

impl OrderedFields<'_> {
    pub fn field<F>(&mut self, key: &str, value: F) -> &mut Self
    where
        F: FnOnce(&mut CanonicalWriter),
    {
        match &mut self.last {
            Some(prev) => {
                debug_assert!(prev.as_bytes() < key.as_bytes(), "keys out of order: {prev} then {key}");
                if cfg!(debug_assertions) {
                    *prev = key.to_string();
                }
                self.w.buf.push(',');
            }
            None => {
                self.last = Some(if cfg!(debug_assertions) {
                    key.to_string()
                } else {
                    String::new()
                })
            }
        }
        self.w.string(key);
        self.w.buf.push(':');
        value(self.w);
        self
    }

    pub fn real(&mut self, key: &str, x: f64) -> &mut Self {
        self.field(key, |w| {
            w.real(x);
        })
    }

    pub fn uint(&mut self, key: &str, v: u64) -> &mut Self {
        self.field(key, |w| {
            w.uint(v);
        })
    }

    pub fn string(&mut self, key: &str, s: &str) -> &mut Self {
        self.field(key, |w| {
            w.string(s);
        })
    }
}
