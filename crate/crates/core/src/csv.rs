//! Plain CSV encoding of a [`ColumnStore`].
//!
//! Header row of column names, one data row per entry, `,` delimiter, no
//! quoting. Reals are written with 17 significant digits in the `%.17g`
//! style, which round-trips every `f64` exactly.

use std::io::{self, Write};

use crate::store::{Column, ColumnKind, ColumnSchema, ColumnStore, StoreError, Value};

/// Formats `x` like C's `%.17g`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let mut digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }
    let mut out = String::with_capacity(24);
    if negative {
        out.push('-');
    }
    if !(-4..17).contains(&exp) {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push('e');
        out.push(if exp < 0 { '-' } else { '+' });
        out.push_str(&format!("{:02}", exp.abs()));
    } else if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(&digits);
            for _ in digits.len()..int_len {
                out.push('0');
            }
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

fn format_value(v: Value) -> String {
    match v {
        Value::Real64(x) => format_real(x),
        Value::Integer64(n) => n.to_string(),
        Value::Boolean(b) => b.to_string(),
    }
}

pub fn write_csv<W: Write>(store: &ColumnStore, mut out: W) -> io::Result<()> {
    let header: Vec<&str> = store.schema().names().collect();
    writeln!(out, "{}", header.join(","))?;
    let views: Vec<_> = (0..store.schema().len()).map(|i| store.column_at(i)).collect();
    let mut line = String::new();
    for i in 0..store.len() {
        line.clear();
        for (j, view) in views.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_value(view.get(i).expect("row in range")));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn to_csv_string(store: &ColumnStore) -> String {
    let mut buf = Vec::new();
    write_csv(store, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

pub fn parse_real(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

fn parse_field(field: &str, kind: ColumnKind) -> Option<Value> {
    let field = field.trim();
    match kind {
        ColumnKind::Real64 => field.parse::<f64>().ok().map(Value::Real64),
        ColumnKind::Integer64 => field.parse::<i64>().ok().map(Value::Integer64),
        ColumnKind::Boolean => match field {
            "true" | "1" => Some(Value::Boolean(true)),
            "false" | "0" => Some(Value::Boolean(false)),
            _ => None,
        },
    }
}

/// Parses CSV text into a store.
///
/// With a `schema`, the header must list exactly its column names in order
/// and fields are parsed by column kind. Without one every column is real64.
/// Blank lines are skipped and `\r\n` line endings are accepted.
pub fn parse_csv(text: &str, schema: Option<&ColumnSchema>) -> Result<ColumnStore, StoreError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_line, header) = lines.next().ok_or(StoreError::Parse {
        line: 1,
        detail: "missing header row".into(),
    })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let schema = match schema {
        Some(s) => {
            if s.names().ne(names.iter().copied()) {
                return Err(StoreError::Parse {
                    line: header_line,
                    detail: format!(
                        "header `{header}` does not match expected columns `{}`",
                        s.names().collect::<Vec<_>>().join(",")
                    ),
                });
            }
            s.clone()
        }
        None => ColumnSchema::homogeneous(names.iter().copied(), ColumnKind::Real64)?,
    };
    let kinds: Vec<ColumnKind> = schema.iter().map(|(_, k)| k).collect();
    let mut columns: Vec<Column> = kinds
        .iter()
        .map(|k| match k {
            ColumnKind::Real64 => Column::Real64(Vec::new()),
            ColumnKind::Integer64 => Column::Integer64(Vec::new()),
            ColumnKind::Boolean => Column::Boolean(Vec::new()),
        })
        .collect();
    for (line_no, line) in lines {
        let mut n_fields = 0;
        for (j, field) in line.split(',').enumerate() {
            n_fields += 1;
            if j >= kinds.len() {
                continue;
            }
            let value = parse_field(field, kinds[j]).ok_or_else(|| StoreError::Parse {
                line: line_no,
                detail: format!("cannot parse `{field}` as {}", kinds[j]),
            })?;
            match (&mut columns[j], value) {
                (Column::Real64(v), Value::Real64(x)) => v.push(x),
                (Column::Integer64(v), Value::Integer64(x)) => v.push(x),
                (Column::Boolean(v), Value::Boolean(x)) => v.push(x),
                _ => unreachable!(),
            }
        }
        if n_fields != kinds.len() {
            return Err(StoreError::Parse {
                line: line_no,
                detail: format!("expected {} fields, found {n_fields}", kinds.len()),
            });
        }
    }
    ColumnStore::from_columns(schema, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_like_printf_g17() {
        let cases = [
            (1.5, "1.5"),
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (100.0, "100"),
            (-2.25, "-2.25"),
            (1e20, "1e+20"),
            (1.25e-7, "1.2499999999999999e-07"),
            (0.0001, "0.0001"),
            (1e16, "10000000000000000"),
            (1e17, "1e+17"),
            (1.0 / 3.0, "0.33333333333333331"),
            (0.0, "0"),
        ];
        for (x, expected) in cases {
            assert_eq!(format_real(x), expected, "{x:e}");
        }
    }

    #[test]
    fn mixed_kinds_round_trip() {
        let schema = ColumnSchema::new([
            ("x", ColumnKind::Real64),
            ("n", ColumnKind::Integer64),
            ("ok", ColumnKind::Boolean),
        ])
        .unwrap();
        let mut s = ColumnStore::new(schema.clone(), 2);
        s.push(&[0.1.into(), (-3i64).into(), true.into()]).unwrap();
        s.push(&[1e300.into(), 7i64.into(), false.into()]).unwrap();
        let text = to_csv_string(&s);
        assert_eq!(text, "x,n,ok\n0.10000000000000001,-3,true\n1.0000000000000001e+300,7,false\n");
        assert_eq!(parse_csv(&text, Some(&schema)).unwrap(), s);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_csv("", None).is_err());
        assert!(parse_csv("x,x\n1,2\n", None).is_err());
        let err = parse_csv("x,y\n1,2\n3\n", None).unwrap_err();
        assert!(matches!(err, StoreError::Parse { line: 3, .. }));
        assert!(parse_csv("x\nabc\n", None).is_err());
        let schema = ColumnSchema::homogeneous(["a"], ColumnKind::Real64).unwrap();
        assert!(parse_csv("b\n1\n", Some(&schema)).is_err());
    }

    #[test]
    fn header_only_is_empty_store() {
        let s = parse_csv("x,y\r\n\r\n", None).unwrap();
        assert_eq!(s.len(), 0);
        assert_eq!(s.schema().len(), 2);
    }

    proptest! {
        #[test]
        fn reals_round_trip_exactly(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let back: f64 = format_real(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
