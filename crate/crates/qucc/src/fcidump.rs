//! Molpro-style FCIDUMP reading and writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qucc_core::IntegralSet;
use thiserror::Error;

/// Relative tolerance for repeated entries that describe the same integral.
const DUPLICATE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fcidump {
    pub integrals: IntegralSet,
    pub orbsym: Vec<u32>,
    pub isym: u32,
    /// Whether a `0 0 0 0` record was present.
    pub has_core_energy: bool,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Header {
    norb: Option<usize>,
    nelec: Option<usize>,
    ms2: i32,
    orbsym: Vec<u32>,
    isym: u32,
}

fn parse_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<(Header, usize), ParseError> {
    let mut text = String::new();
    let mut first = None;
    let mut last = 0;
    let mut closed = false;
    for (n, line) in lines.by_ref() {
        let trimmed = line.trim();
        if first.is_none() {
            if trimmed.is_empty() {
                continue;
            }
            let upper = trimmed.to_ascii_uppercase();
            if !upper.starts_with("&FCI") && !upper.starts_with("$FCI") {
                return Err(err(n, "expected header starting with &FCI"));
            }
            first = Some(n);
            text.push_str(&trimmed[4..]);
        } else {
            text.push(' ');
            text.push_str(trimmed);
        }
        last = n;
        let upper = text.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END").or_else(|| upper.find("$END")).or_else(|| upper.find('/')) {
            text.truncate(pos);
            closed = true;
            break;
        }
    }
    let Some(first) = first else {
        return Err(err(1, "missing &FCI header"));
    };
    if !closed {
        return Err(err(last.max(first), "header is not terminated by &END or /"));
    }

    // Split "KEY=v1,v2,KEY2=..." into keys and value lists.
    let mut header = Header {
        isym: 1,
        ..Header::default()
    };
    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for token in text.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
        if let Some((key, value)) = token.split_once('=') {
            let mut values = Vec::new();
            if !value.is_empty() {
                values.push(value.to_string());
            }
            fields.push((key.trim().to_ascii_uppercase(), values));
        } else if let Some(f) = fields.last_mut() {
            f.1.push(token.to_string());
        } else {
            return Err(err(first, format!("unexpected token {token:?} in header")));
        }
    }
    let single = |key: &str, values: &[String]| -> Result<i64, ParseError> {
        match values {
            [v] => v
                .parse::<i64>()
                .map_err(|_| err(first, format!("{key} expects an integer, found {v:?}"))),
            _ => Err(err(first, format!("{key} expects a single value"))),
        }
    };
    for (key, values) in &fields {
        match key.as_str() {
            "NORB" => {
                let v = single(key, values)?;
                header.norb = Some(usize::try_from(v).map_err(|_| err(first, "NORB must be non-negative"))?);
            }
            "NELEC" => {
                let v = single(key, values)?;
                header.nelec = Some(usize::try_from(v).map_err(|_| err(first, "NELEC must be non-negative"))?);
            }
            "MS2" => header.ms2 = single(key, values)? as i32,
            "ISYM" => header.isym = single(key, values)? as u32,
            "ORBSYM" => {
                header.orbsym = values
                    .iter()
                    .map(|v| v.parse::<u32>().map_err(|_| err(first, format!("bad ORBSYM value {v:?}"))))
                    .collect::<Result<_, _>>()?;
            }
            "UHF" | "IUHF" => {
                let v = values.first().map(|s| s.to_ascii_uppercase()).unwrap_or_default();
                if v.contains('T') || v == "1" {
                    return Err(err(first, "unrestricted integrals are not supported"));
                }
            }
            _ => {}
        }
    }
    Ok((header, last))
}

fn parse_value(token: &str) -> Option<f64> {
    token.replace(['D', 'd'], "E").parse::<f64>().ok()
}

fn consistent(old: f64, new: f64) -> bool {
    (old - new).abs() <= DUPLICATE_TOLERANCE * old.abs().max(new.abs()).max(1.0)
}

/// Parses FCIDUMP text. Indices in the file are 1-based.
pub fn parse_fcidump(text: &str) -> Result<Fcidump, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (header, header_end) = parse_header(&mut lines)?;
    let norb = header.norb.ok_or_else(|| err(header_end, "header lacks NORB"))?;
    let nelec = header.nelec.ok_or_else(|| err(header_end, "header lacks NELEC"))?;
    let mut ints = IntegralSet::new(norb, nelec, header.ms2).map_err(|e| err(header_end, e.to_string()))?;

    let npair = norb * (norb + 1) / 2;
    let mut two_seen: Vec<Option<f64>> = vec![None; npair * (npair + 1) / 2];
    let mut one_seen: Vec<Option<f64>> = vec![None; norb * norb];
    let mut core: Option<f64> = None;

    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(err(n, format!("expected `value i j k l`, found {} fields", tokens.len())));
        }
        let value = parse_value(tokens[0]).ok_or_else(|| err(n, format!("bad value {:?}", tokens[0])))?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&tokens[1..]) {
            let v: i64 = tok.parse().map_err(|_| err(n, format!("bad index {tok:?}")))?;
            if v < 0 || v as usize > norb {
                return Err(err(n, format!("index {v} outside 0..={norb}")));
            }
            *slot = v as usize;
        }
        // Repeated records may differ in the last bits; keeping the largest
        // makes the result independent of record order.
        let check = |seen: &mut Option<f64>, what: &str| -> Result<f64, ParseError> {
            match *seen {
                Some(old) if !consistent(old, value) => Err(err(
                    n,
                    format!("{what} redefined inconsistently ({old:e} then {value:e})"),
                )),
                Some(old) => Ok(*seen.insert(old.max(value))),
                None => Ok(*seen.insert(value)),
            }
        };
        match idx {
            [0, 0, 0, 0] => {
                let v = check(&mut core, "core energy")?;
                ints.set_core_energy(v);
            }
            [p, 0, 0, 0] if p > 0 => {
                // Orbital energy record; recomputed from the integrals instead.
            }
            [p, q, 0, 0] if p > 0 && q > 0 => {
                let (p, q) = (p - 1, q - 1);
                let v = check(&mut one_seen[p.max(q) * norb + p.min(q)], "one-body integral")?;
                ints.set_one_body(p, q, v);
            }
            [p, q, r, s] if p > 0 && q > 0 && r > 0 && s > 0 => {
                let (p, q, r, s) = (p - 1, q - 1, r - 1, s - 1);
                let k = ints.two_body_index(p, q, r, s);
                let v = check(&mut two_seen[k], "two-body integral")?;
                ints.set_two_body(p, q, r, s, v);
            }
            _ => return Err(err(n, "index pattern matches no integral type")),
        }
    }
    let orbsym = if header.orbsym.is_empty() {
        vec![1; norb]
    } else {
        header.orbsym
    };
    Ok(Fcidump {
        integrals: ints,
        orbsym,
        isym: header.isym,
        has_core_energy: core.is_some(),
    })
}

pub fn read_fcidump(path: &Path) -> Result<Fcidump, ReadError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fcidump(&text).map_err(|source| ReadError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes every nonzero unique integral with enough digits to round-trip.
pub fn write_fcidump(dump: &Fcidump) -> String {
    let ints = &dump.integrals;
    let m = ints.n_spatial();
    let mut out = String::new();
    let orbsym: Vec<String> = dump.orbsym.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(
        out,
        " &FCI NORB={m},NELEC={},MS2={},\n  ORBSYM={},\n  ISYM={},\n &END",
        ints.n_electrons(),
        ints.ms2(),
        orbsym.join(","),
        dump.isym
    );
    for p in 0..m {
        for q in 0..=p {
            for r in 0..m {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let v = ints.two_body(p, q, r, s);
                    if v != 0.0 {
                        let _ = writeln!(out, "{v:>25.16e} {:>4} {:>4} {:>4} {:>4}", p + 1, q + 1, r + 1, s + 1);
                    }
                }
            }
        }
    }
    for p in 0..m {
        for q in 0..=p {
            let v = ints.one_body(p, q);
            if v != 0.0 {
                let _ = writeln!(out, "{v:>25.16e} {:>4} {:>4}    0    0", p + 1, q + 1);
            }
        }
    }
    if dump.has_core_energy || ints.core_energy() != 0.0 {
        let _ = writeln!(out, "{:>25.16e}    0    0    0    0", ints.core_energy());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = " &FCI NORB=2,NELEC=2,MS2=0,\n  ORBSYM=1,1,\n  ISYM=1,\n &END\n\
        0.5 1 1 1 1\n0.25 2 1 2 1\n0.125 2 1 1 1\n-1.0 1 1 0 0\n-0.5 2 1 0 0\n0.75 0 0 0 0\n";

    #[test]
    fn parses_small_file() {
        let d = parse_fcidump(SMALL).unwrap();
        let ints = &d.integrals;
        assert_eq!(ints.n_spatial(), 2);
        assert_eq!(ints.n_electrons(), 2);
        assert_eq!(ints.core_energy(), 0.75);
        assert_eq!(ints.two_body(0, 1, 0, 1), 0.25);
        assert_eq!(ints.two_body(1, 0, 0, 1), 0.25);
        assert_eq!(ints.two_body(0, 0, 0, 1), 0.125);
        assert_eq!(ints.one_body(0, 1), -0.5);
        assert!(d.has_core_energy);
        assert_eq!(d.orbsym, vec![1, 1]);
    }

    #[test]
    fn permuted_lookup() {
        let text = " &FCI NORB=4,NELEC=2, / \n 0.3 1 2 3 4\n";
        let ints = parse_fcidump(text).unwrap().integrals;
        for (p, q, r, s) in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)] {
            assert_eq!(ints.two_body(p, q, r, s), 0.3);
        }
        assert_eq!(ints.two_body(0, 2, 1, 3), 0.0);
    }

    #[test]
    fn slash_terminator_and_fortran_exponent() {
        let text = "&FCI NORB=1, NELEC=2, MS2=0 /\n 1.5D-1 1 1 1 1\n 5.0d-1 0 0 0 0\n";
        let ints = parse_fcidump(text).unwrap().integrals;
        assert_eq!(ints.two_body(0, 0, 0, 0), 0.15);
        assert_eq!(ints.core_energy(), 0.5);
    }

    #[test]
    fn orbital_energy_records_ignored() {
        let text = "&FCI NORB=2,NELEC=2 &END\n -0.6 1 0 0 0\n 0.1 2 0 0 0\n";
        let ints = parse_fcidump(text).unwrap().integrals;
        assert_eq!(ints.one_body(0, 0), 0.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("NORB=2\n", 1, "&FCI"),
            ("&FCI NORB=2,NELEC=2\n 0.1 1 1 1 1\n", 2, "terminated"),
            ("&FCI NELEC=2 &END\n", 1, "NORB"),
            ("&FCI NORB=x,NELEC=2 &END\n", 1, "integer"),
            ("&FCI NORB=2,NELEC=2 &END\n0.1 1 1 1 1\n0.1 3 1 1 1\n", 3, "outside"),
            ("&FCI NORB=2,NELEC=2 &END\n0.1 1 1 1\n", 2, "fields"),
            ("&FCI NORB=2,NELEC=2 &END\nabc 1 1 1 1\n", 2, "bad value"),
            ("&FCI NORB=2,NELEC=2 &END\n0.1 1 2 1 1\n0.2 2 1 1 1\n", 3, "inconsistently"),
            ("&FCI NORB=2,NELEC=2 &END\n0.1 1 2 0 0\n0.2 2 1 0 0\n", 3, "inconsistently"),
            ("&FCI NORB=2,NELEC=2 &END\n0.1 0 1 0 0\n", 2, "pattern"),
            ("&FCI NORB=2,NELEC=2,UHF=.TRUE. &END\n", 1, "unrestricted"),
            ("&FCI NORB=2,NELEC=7 &END\n", 1, "electron"),
        ];
        for (text, line, needle) in cases {
            let e = parse_fcidump(text).unwrap_err();
            assert_eq!(e.line, line, "{text:?}: {e}");
            assert!(e.message.contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn rounding_level_duplicates_accepted() {
        let text = "&FCI NORB=2,NELEC=2 &END\n0.6634680964235677 1 1 2 2\n0.6634680964235676 2 2 1 1\n";
        assert!(parse_fcidump(text).is_ok());
    }

    #[test]
    fn round_trip() {
        let d = parse_fcidump(SMALL).unwrap();
        let again = parse_fcidump(&write_fcidump(&d)).unwrap();
        assert_eq!(d, again);
    }
}
