//! Deterministic CSV emission: RFC-4180 quoting, LF line endings, '.'
//! decimal separator, numbers at 9 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

/// Formats a float with up to 9 significant digits, plain decimal inside
/// a sane exponent window and scientific notation outside it. Trailing
/// zeros are trimmed; the output never depends on locale.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes a header row plus homogeneous records; returns the bytes
/// written so callers can digest them.
pub fn emit_csv(header: &[String], rows: &[Vec<String>], path: &Path) -> std::io::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    writeln_row(&mut bytes, header);
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "record does not match schema");
        writeln_row(&mut bytes, row);
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(bytes)
}

fn writeln_row(buf: &mut Vec<u8>, fields: &[String]) {
    let line = fields
        .iter()
        .map(|f| quote(f))
        .collect::<Vec<_>>()
        .join(",");
    buf.extend_from_slice(line.as_bytes());
    buf.push(b'\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_reference_values() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(39.0), "39");
        assert_eq!(fmt_f64(169.0), "169");
        assert_eq!(fmt_f64(17.0 / 3.0), "5.66666667");
        assert_eq!(fmt_f64(-443.75), "-443.75");
        assert_eq!(fmt_f64(1.0e12), "1.00000000e12");
        assert_eq!(fmt_f64(2.5e-7), "2.50000000e-7");
    }

    #[test]
    fn rounding_keeps_nine_significant_digits() {
        assert_eq!(fmt_f64(123456789.5), "123456790");
        assert_eq!(fmt_f64(0.999999999951), "1");
    }

    #[test]
    fn quoting_follows_rfc4180() {
        assert_eq!(quote("plain"), "plain");
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn empty_record_list_emits_header_only() {
        let dir = std::env::temp_dir().join("offnet-csv-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        let header = vec!["a".to_string(), "b".to_string()];
        let bytes = emit_csv(&header, &[], &path).unwrap();
        assert_eq!(bytes, b"a,b\n");
        let one_row = vec![vec!["1".to_string(), "2".to_string()]];
        let bytes = emit_csv(&header, &one_row, &path).unwrap();
        assert_eq!(bytes, b"a,b\n1,2\n");
    }
}
