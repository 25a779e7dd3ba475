//! Parsing of command-line values: measures, complex numbers, z lists.

use polyspec_core::{parse, Complex64, SpectralMeasure, Word};

use crate::error::{CliError, CliResult};

/// A measure given either as `t:w,t:w,...` or as a JSON array `[[t,w],...]`.
/// Repeated atoms are merged.
pub fn parse_measure(text: &str) -> CliResult<SpectralMeasure> {
    let trimmed = text.trim();
    let atoms: Vec<(f64, f64)> = if trimmed.starts_with('[') {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(trimmed)
            .map_err(|e| CliError::Usage(format!("measure JSON must be [[t, w], ...]: {}", e)))?;
        pairs.into_iter().map(|[t, w]| (t, w)).collect()
    } else {
        trimmed
            .split(',')
            .map(|atom| {
                let (t, w) = atom
                    .split_once(':')
                    .ok_or_else(|| CliError::Usage(format!("measure atom '{}' is not of the form t:w", atom)))?;
                let num = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("'{}' is not a number in measure atom '{}'", s, atom)))
                };
                Ok((num(t)?, num(w)?))
            })
            .collect::<CliResult<_>>()?
    };
    Ok(SpectralMeasure::from_unsorted(atoms)?)
}

/// A complex number such as `2i`, `1+1.5i`, `-1-2i`, `0.5` or `(1+2i)`.
pub fn parse_complex(text: &str) -> CliResult<Complex64> {
    let invalid = || CliError::Usage(format!("'{}' is not a complex number", text.trim()));
    let p = parse(text).map_err(|_| invalid())?;
    if p.degree() > 0 {
        return Err(invalid());
    }
    Ok(p.coefficient(&Word::unit()))
}

/// Comma-separated complex numbers.
pub fn parse_complex_list(text: &str) -> CliResult<Vec<Complex64>> {
    let zs: Vec<Complex64> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_complex)
        .collect::<CliResult<_>>()?;
    if zs.is_empty() {
        return Err(CliError::Usage("empty list of spectral parameters".into()));
    }
    Ok(zs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures() {
        let a = parse_measure("-1:0.5, 1:0.5").unwrap();
        let b = parse_measure("[[1, 0.5], [-1, 0.5]]").unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_measure("0:1").unwrap(), SpectralMeasure::dirac(0.0));
        assert!(parse_measure("0:0.5").is_err());
        assert!(parse_measure("0-1").is_err());
        assert!(parse_measure("[[0]]").is_err());
    }

    #[test]
    fn complex_numbers() {
        assert_eq!(parse_complex("2i").unwrap(), Complex64::new(0.0, 2.0));
        assert_eq!(parse_complex("1+1.5i").unwrap(), Complex64::new(1.0, 1.5));
        assert_eq!(parse_complex(" -1-2i ").unwrap(), Complex64::new(-1.0, -2.0));
        assert_eq!(parse_complex("0.25").unwrap(), Complex64::new(0.25, 0.0));
        assert!(parse_complex("x").is_err());
        assert!(parse_complex("1+").is_err());
        let zs = parse_complex_list("2i,1+1.5i,-1+2i").unwrap();
        assert_eq!(zs.len(), 3);
        assert!(parse_complex_list(" , ").is_err());
    }
}
