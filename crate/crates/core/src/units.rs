//! Quantities with unit suffixes, converted to SI at load time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Dimensionless,
    Length,
    Area,
    Velocity,
    Temperature,
    CurrentDensity,
    ElectricalConductivity,
    ThermalConductivity,
    HeatTransferCoefficient,
    PowerDensity,
    Density,
    Viscosity,
    SurfaceTension,
    MassFlux,
}

impl Dimension {
    /// Accepted spellings after normalization, with `(scale, offset)` to SI.
    fn units(self) -> &'static [(&'static str, f64, f64)] {
        use Dimension::*;
        match self {
            Dimensionless => &[("", 1.0, 0.0), ("%", 0.01, 0.0)],
            Length => &[
                ("m", 1.0, 0.0),
                ("mm", 1e-3, 0.0),
                ("um", 1e-6, 0.0),
                ("cm", 1e-2, 0.0),
            ],
            Area => &[("m2", 1.0, 0.0), ("mm2", 1e-6, 0.0), ("cm2", 1e-4, 0.0)],
            Velocity => &[("m/s", 1.0, 0.0)],
            Temperature => &[("K", 1.0, 0.0), ("degC", 1.0, 273.15), ("C", 1.0, 273.15)],
            CurrentDensity => &[("A/m2", 1.0, 0.0), ("A/mm2", 1e6, 0.0)],
            ElectricalConductivity => &[("S/m", 1.0, 0.0), ("MS/m", 1e6, 0.0)],
            ThermalConductivity => &[("W/Km", 1.0, 0.0), ("W/mK", 1.0, 0.0)],
            HeatTransferCoefficient => &[
                ("W/Km2", 1.0, 0.0),
                ("W/m2K", 1.0, 0.0),
                ("kW/Km2", 1e3, 0.0),
                ("kW/m2K", 1e3, 0.0),
            ],
            PowerDensity => &[("W/m3", 1.0, 0.0), ("kW/m3", 1e3, 0.0), ("MW/m3", 1e6, 0.0)],
            Density => &[("kg/m3", 1.0, 0.0)],
            Viscosity => &[("Pas", 1.0, 0.0), ("mPas", 1e-3, 0.0)],
            SurfaceTension => &[("N/m", 1.0, 0.0), ("mN/m", 1e-3, 0.0)],
            MassFlux => &[("kg/m2s", 1.0, 0.0), ("kg/sm2", 1.0, 0.0)],
        }
    }

    /// SI spelling used when writing values back out.
    pub fn si_unit(self) -> &'static str {
        self.units()[0].0
    }
}

/// `K·m` → `Km`, `m²` → `m2`, `µm` → `um`, `W/(m^2 K)` → `W/m2K`.
fn normalize(unit: &str) -> String {
    unit.chars()
        .filter(|c| !matches!(c, ' ' | '·' | '*' | '(' | ')' | '^' | '.'))
        .map(|c| match c {
            '²' => '2',
            '³' => '3',
            'µ' | 'μ' => 'u',
            '°' => 'd',
            c => c,
        })
        .collect::<String>()
        .replace("dC", "degC")
}

/// Parses `"22.5 kW/Km2"` into SI. A bare number is taken as SI.
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || matches!(c, '.' | '+' | '-')
                || ((c == 'e' || c == 'E') && i > 0 && {
                    // exponent only when followed by a digit or sign
                    text[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')
                }))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{text}` does not start with a number")))?;
    let unit = normalize(unit);
    dimension
        .units()
        .iter()
        .find(|(u, _, _)| *u == unit)
        .map(|(_, scale, offset)| value * scale + offset)
        .ok_or_else(|| {
            let known: Vec<&str> = dimension
                .units()
                .iter()
                .map(|u| u.0)
                .filter(|u| !u.is_empty())
                .collect();
            Error::Config(format!(
                "unit `{}` in `{text}` is not a {dimension:?} unit (expected one of {})",
                unit,
                known.join(", ")
            ))
        })
}

/// Config value: an SI number or a string with a unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Si(f64),
    Text(String),
}

impl Quantity {
    pub fn to_si(&self, dimension: Dimension) -> Result<f64> {
        match self {
            Quantity::Si(v) => Ok(*v),
            Quantity::Text(t) => parse_quantity(t, dimension),
        }
    }
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Si(v)
    }
}

impl From<&str> for Quantity {
    fn from(v: &str) -> Self {
        Quantity::Text(v.to_string())
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Si(v) => write!(f, "{v}"),
            Quantity::Text(t) => f.write_str(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Dimension::*;

    #[test]
    fn mixed_units() {
        let cases = [
            ("10 A/mm2", CurrentDensity, 1e7),
            ("10A/mm²", CurrentDensity, 1e7),
            ("22.485 kW/Km2", HeatTransferCoefficient, 22485.0),
            ("22.485 kW/(m²·K)", HeatTransferCoefficient, 22485.0),
            ("497 um", Length, 497e-6),
            ("497 µm", Length, 497e-6),
            ("107.7 mm2", Area, 107.7e-6),
            ("60 MS/m", ElectricalConductivity, 60e6),
            ("400 W/(K·m)", ThermalConductivity, 400.0),
            ("20 °C", Temperature, 293.15),
            ("1.7 MW/m3", PowerDensity, 1.7e6),
            ("1e-3 Pa s", Viscosity, 1e-3),
            ("5.3 kg/(m2 s)", MassFlux, 5.3),
            ("59 %", Dimensionless, 0.59),
            ("2.5e-2", Dimensionless, 0.025),
        ];
        for (text, dim, expect) in cases {
            let v = parse_quantity(text, dim).unwrap();
            assert!((v - expect).abs() <= 1e-12 * expect.abs(), "{text}: {v}");
        }
    }

    #[test]
    fn rejects_wrong_dimension_and_garbage() {
        let e = parse_quantity("10 mm", CurrentDensity)
            .unwrap_err()
            .to_string();
        assert!(e.contains("`mm`") && e.contains("A/mm2"), "{e}");
        assert!(parse_quantity("fast", Velocity).is_err());
        assert!(parse_quantity("", Length).is_err());
    }

    #[test]
    fn untagged_values() {
        #[derive(Deserialize)]
        struct T {
            a: Quantity,
            b: Quantity,
        }
        let t: T = toml::from_str("a = 1.5\nb = \"3 mm\"").unwrap();
        assert_eq!(t.a.to_si(Length).unwrap(), 1.5);
        assert!((t.b.to_si(Length).unwrap() - 3e-3).abs() < 1e-18);
    }
}
