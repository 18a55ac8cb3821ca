//! FCIDUMP integral files.
//!
//! The file layer ([`Fcidump`]) keeps the integrals exactly as stored:
//! chemists'-notation `(ij|kl)` for the normal-ordered Hamiltonian
//! `sum h_ij a+_i a_j + 1/2 sum (ij|kl) a+_i a+_k a_l a_j`. Converting to the
//! excitation-operator form used everywhere else applies
//!
//! * `g_ijkl = (ij|kl) / 2`
//! * `h_ij <- h_ij - 1/2 sum_k (ik|kj)`
//!
//! which follows from `a+_i a_j a+_k a_l = a+_i a+_k a_l a_j + delta_jk a+_i a_l`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FcidumpError, Result};
use crate::hamiltonian::{canonical_index, Hamiltonian, OneBodyMatrix, TwoBodyTensor, SYMMETRY_TOLERANCE};

/// Identifier of the integral convention applied by [`Fcidump::to_hamiltonian`].
pub const INTEGRAL_CONVENTION: &str = "fcidump-chemist-normal-ordered";

type TwoKey = (usize, usize, usize, usize);

/// Raw contents of an FCIDUMP file, keyed by 0-based canonical indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fcidump {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i64,
    pub core: f64,
    pub one_body: BTreeMap<(usize, usize), f64>,
    pub two_body: BTreeMap<TwoKey, f64>,
}

struct Accum {
    first: f64,
    line: usize,
    values: Vec<f64>,
}

impl Accum {
    fn new(value: f64, line: usize) -> Self {
        Self {
            first: value,
            line,
            values: vec![value],
        }
    }

    fn push(&mut self, value: f64, line: usize) -> Result<(), FcidumpError> {
        let tol = SYMMETRY_TOLERANCE * value.abs().max(self.first.abs());
        if (value - self.first).abs() > tol {
            return Err(FcidumpError::Asymmetric {
                line,
                value,
                previous: self.first,
                previous_line: self.line,
            });
        }
        self.values.push(value);
        Ok(())
    }

    fn value(&self) -> f64 {
        if self.values.iter().all(|&v| v == self.first) {
            self.first
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}

fn parse_value(token: &str, line: usize) -> Result<f64, FcidumpError> {
    let normalized = token.replace(['D', 'd'], "E");
    let v: f64 = normalized.parse().map_err(|_| FcidumpError::MalformedRecord {
        line,
        reason: format!("cannot parse value {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(FcidumpError::NonFinite {
            line,
            value: token.to_string(),
        });
    }
    Ok(v)
}

struct Header {
    norb: usize,
    nelec: usize,
    ms2: i64,
}

fn parse_header(text: &str, first_line: usize) -> Result<Header, FcidumpError> {
    let malformed = |reason: String| FcidumpError::MalformedHeader {
        line: first_line,
        reason,
    };
    let body = text.trim_start();
    let body = body
        .get(..4)
        .filter(|p| p.eq_ignore_ascii_case("&FCI"))
        .map(|_| &body[4..])
        .ok_or_else(|| malformed("expected '&FCI'".into()))?;
    let mut body = body.to_string();
    while body.contains(" =") || body.contains("= ") || body.contains("=\t") {
        body = body.replace(" =", "=").replace("= ", "=").replace("=\t", "=");
    }
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    for token in body.split([',', ' ', '\t', '\n', '\r']).filter(|t| !t.is_empty()) {
        if let Some((key, value)) = token.split_once('=') {
            fields.insert(key.trim().to_ascii_uppercase(), value.trim().to_string());
        }
    }
    let int_field = |key: &str| -> Result<Option<i64>, FcidumpError> {
        match fields.get(key) {
            None => Ok(None),
            Some(v) if v.is_empty() => Err(malformed(format!("{key} has no value"))),
            Some(v) => v
                .parse::<i64>()
                .map(Some)
                .map_err(|_| malformed(format!("{key}={v} is not an integer"))),
        }
    };
    let norb = int_field("NORB")?.ok_or_else(|| malformed("missing NORB".into()))?;
    if norb < 1 {
        return Err(malformed(format!("NORB={norb} must be positive")));
    }
    let nelec = int_field("NELEC")?.ok_or_else(|| malformed("missing NELEC".into()))?;
    if nelec < 0 || nelec > 2 * norb {
        return Err(malformed(format!("NELEC={nelec} outside 0..={}", 2 * norb)));
    }
    let ms2 = int_field("MS2")?.unwrap_or(0);
    Ok(Header {
        norb: norb as usize,
        nelec: nelec as usize,
        ms2,
    })
}

fn is_header_end(line: &str) -> bool {
    let t = line.trim();
    t.to_ascii_uppercase().contains("&END") || t == "/" || t.ends_with('/')
}

impl Fcidump {
    pub fn parse(text: &str) -> Result<Self, FcidumpError> {
        let lines: Vec<&str> = text.lines().collect();
        let start = lines
            .iter()
            .position(|l| !l.trim().is_empty())
            .ok_or_else(|| FcidumpError::MalformedHeader {
                line: 1,
                reason: "empty file".into(),
            })?;
        let end = (start..lines.len())
            .find(|&i| is_header_end(lines[i]))
            .ok_or_else(|| FcidumpError::MalformedHeader {
                line: start + 1,
                reason: "no '&END' or '/' terminating the header".into(),
            })?;
        let header_text: String = lines[start..=end]
            .iter()
            .map(|l| l.replace("&END", "").replace("&end", "").replace('/', ""))
            .collect::<Vec<_>>()
            .join("\n");
        let header = parse_header(&header_text, start + 1)?;
        let norb = header.norb;

        let mut core: Option<Accum> = None;
        let mut one: BTreeMap<(usize, usize), Accum> = BTreeMap::new();
        let mut two: BTreeMap<TwoKey, Accum> = BTreeMap::new();

        for (offset, raw) in lines[end + 1..].iter().enumerate() {
            let line = end + 2 + offset;
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            if tokens.len() != 5 {
                return Err(FcidumpError::MalformedRecord {
                    line,
                    reason: format!("expected 5 fields, found {}", tokens.len()),
                });
            }
            let value = parse_value(tokens[0], line)?;
            let mut idx = [0usize; 4];
            for (slot, tok) in idx.iter_mut().zip(&tokens[1..]) {
                let v: i64 = tok.parse().map_err(|_| FcidumpError::MalformedRecord {
                    line,
                    reason: format!("cannot parse index {tok:?}"),
                })?;
                if v < 0 || v as usize > norb {
                    return Err(FcidumpError::IndexOutOfRange { line, index: v, norb });
                }
                *slot = v as usize;
            }
            match idx {
                [0, 0, 0, 0] => match core.as_mut() {
                    Some(acc) => acc.push(value, line)?,
                    None => core = Some(Accum::new(value, line)),
                },
                // orbital energies; not part of the Hamiltonian
                [_, 0, 0, 0] => {}
                [i, j, 0, 0] if i > 0 && j > 0 => {
                    let key = ((i - 1).min(j - 1), (i - 1).max(j - 1));
                    match one.get_mut(&key) {
                        Some(acc) => acc.push(value, line)?,
                        None => {
                            one.insert(key, Accum::new(value, line));
                        }
                    }
                }
                [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                    let key = canonical_index(i - 1, j - 1, k - 1, l - 1);
                    match two.get_mut(&key) {
                        Some(acc) => acc.push(value, line)?,
                        None => {
                            two.insert(key, Accum::new(value, line));
                        }
                    }
                }
                _ => {
                    return Err(FcidumpError::MalformedRecord {
                        line,
                        reason: format!("index pattern {idx:?} is neither one- nor two-body"),
                    })
                }
            }
        }

        Ok(Self {
            norb,
            nelec: header.nelec,
            ms2: header.ms2,
            core: core.map_or(0.0, |a| a.value()),
            one_body: one.into_iter().map(|(k, a)| (k, a.value())).collect(),
            two_body: two.into_iter().map(|(k, a)| (k, a.value())).collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, FcidumpError> {
        let text = std::fs::read_to_string(path).map_err(|source| FcidumpError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serializes with one line per canonical orbit representative. Values
    /// use the shortest representation that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, " &FCI NORB={},NELEC={},MS2={},", self.norb, self.nelec, self.ms2);
        let _ = writeln!(out, " &END");
        for (&(i, j, k, l), v) in &self.two_body {
            let _ = writeln!(out, "{:>26e} {:>4} {:>4} {:>4} {:>4}", v, i + 1, j + 1, k + 1, l + 1);
        }
        for (&(i, j), v) in &self.one_body {
            let _ = writeln!(out, "{:>26e} {:>4} {:>4} {:>4} {:>4}", v, i + 1, j + 1, 0, 0);
        }
        let _ = writeln!(out, "{:>26e} {:>4} {:>4} {:>4} {:>4}", self.core, 0, 0, 0, 0);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Converts to the excitation-operator form.
    pub fn to_hamiltonian(&self) -> Result<Hamiltonian> {
        let n = self.norb;
        let g = TwoBodyTensor::from_canonical_fn(n, |i, j, k, l| {
            0.5 * self.two_body.get(&(i, j, k, l)).copied().unwrap_or(0.0)
        });
        let h = OneBodyMatrix::from_upper_fn(n, |i, j| {
            let raw = self.one_body.get(&(i, j)).copied().unwrap_or(0.0);
            let exchange: f64 = (0..n).map(|k| g.get(i, k, k, j)).sum();
            raw - exchange
        });
        Hamiltonian::new(h, g, self.core, self.nelec)
    }

    /// Inverse of [`Fcidump::to_hamiltonian`]; zero entries are omitted.
    pub fn from_hamiltonian(ham: &Hamiltonian, ms2: i64) -> Self {
        let n = ham.n_orbitals();
        let mut one_body = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                let exchange: f64 = (0..n).map(|k| ham.g.get(i, k, k, j)).sum();
                let v = ham.h.get(i, j) + exchange;
                if v != 0.0 {
                    one_body.insert((i, j), v);
                }
            }
        }
        let mut two_body = BTreeMap::new();
        for key @ (i, j, k, l) in crate::hamiltonian::canonical_indices(n) {
            let v = 2.0 * ham.g.get(i, j, k, l);
            if v != 0.0 {
                two_body.insert(key, v);
            }
        }
        Self {
            norb: n,
            nelec: ham.n_electrons,
            ms2,
            core: ham.core_constant,
            one_body,
            two_body,
        }
    }
}

/// Reads an FCIDUMP file into a [`Hamiltonian`].
pub fn load_integrals(path: &Path) -> Result<Hamiltonian> {
    Fcidump::read(path)?.to_hamiltonian()
}

/// Writes a [`Hamiltonian`] as an FCIDUMP file.
pub fn write_integrals(ham: &Hamiltonian, path: &Path) -> Result<()> {
    Fcidump::from_hamiltonian(ham, 0).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Fcidump, FcidumpError> {
        Fcidump::parse(text)
    }

    #[test]
    fn single_one_body_entry() {
        let f = parse("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 1.5 1 1 0 0\n").unwrap();
        let ham = f.to_hamiltonian().unwrap();
        assert_eq!(ham.h.get(0, 0), 1.5);
        assert_eq!(ham.h.get(1, 1), 0.0);
        assert!(ham.g.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(ham.n_electrons, 2);
    }

    #[test]
    fn off_diagonal_is_mirrored() {
        let ham = parse("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n 0.7 1 2 0 0\n")
            .unwrap()
            .to_hamiltonian()
            .unwrap();
        assert_eq!(ham.h.get(0, 1), 0.7);
        assert_eq!(ham.h.get(1, 0), 0.7);
    }

    #[test]
    fn multiline_header_and_slash_terminator() {
        let text = " &FCI NORB=  3,NELEC=4,MS2=0,\n  ORBSYM=1,1,1,\n  ISYM=1,\n /\n 0.25 1 1 1 1\n -3.0 0 0 0 0\n";
        let f = parse(text).unwrap();
        assert_eq!(f.norb, 3);
        assert_eq!(f.nelec, 4);
        assert_eq!(f.core, -3.0);
        assert_eq!(f.two_body[&(0, 0, 0, 0)], 0.25);
    }

    #[test]
    fn fortran_exponent() {
        let f = parse("&FCI NORB=1,NELEC=1,\n&END\n 1.0D-02 1 1 0 0\n").unwrap();
        assert_eq!(f.one_body[&(0, 0)], 1.0e-2);
    }

    #[test]
    fn two_body_convention() {
        // (11|11) = 0.5 -> g_0000 = 0.25 and h_00 corrected by -1/2 (11|11)
        let ham = parse("&FCI NORB=1,NELEC=2,\n&END\n 0.5 1 1 1 1\n -1.0 1 1 0 0\n")
            .unwrap()
            .to_hamiltonian()
            .unwrap();
        assert_eq!(ham.g.get(0, 0, 0, 0), 0.25);
        assert_eq!(ham.h.get(0, 0), -1.25);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse(""), Err(FcidumpError::MalformedHeader { .. })));
        assert!(matches!(
            parse("NORB=2\n&END\n"),
            Err(FcidumpError::MalformedHeader { line: 1, .. })
        ));
        assert!(matches!(
            parse("&FCI NELEC=2,\n&END\n"),
            Err(FcidumpError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse("&FCI NORB=x,NELEC=2,\n&END\n"),
            Err(FcidumpError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse("&FCI NORB=2,NELEC=2,\n 1.0 1 1 0 0\n"),
            Err(FcidumpError::MalformedHeader { .. })
        ));
    }

    #[test]
    fn record_errors_carry_line_numbers() {
        let base = "&FCI NORB=2,NELEC=2,\n&END\n 1.0 1 1 0 0\n";
        match parse(&format!("{base} nan 1 2 0 0\n")) {
            Err(FcidumpError::NonFinite { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse(&format!("{base} 1.0 3 1 0 0\n")) {
            Err(FcidumpError::IndexOutOfRange { line: 4, index: 3, norb: 2 }) => {}
            other => panic!("{other:?}"),
        }
        match parse(&format!("{base} 1.0 1 1 0\n")) {
            Err(FcidumpError::MalformedRecord { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse(&format!("{base} 1.0 1 0 1 0\n")) {
            Err(FcidumpError::MalformedRecord { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse(&format!("{base} abc 1 1 0 0\n")) {
            Err(FcidumpError::MalformedRecord { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conflicting_symmetric_entries() {
        let text = "&FCI NORB=2,NELEC=2,\n&END\n 0.3 1 2 1 1\n 0.4 2 1 1 1\n";
        match parse(text) {
            Err(FcidumpError::Asymmetric { line: 4, previous_line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        // below tolerance is averaged
        let text = "&FCI NORB=2,NELEC=2,\n&END\n 0.3 1 2 1 1\n 0.30000000000001 2 1 1 1\n";
        let f = parse(text).unwrap();
        assert!((f.two_body[&(0, 0, 0, 1)] - 0.3).abs() < 1e-13);
    }

    #[test]
    fn missing_file_names_path() {
        let err = Fcidump::read(Path::new("/nonexistent/FCIDUMP")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/FCIDUMP"));
    }
}
