use super::RegError;
use std::path::Path;

const USRP_N210: &str = include_str!("../../data/usrp_n210_calibration.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub gain: f64,
    pub channel_power_dbm: f64,
    pub psd_dbm_hz: f64,
    pub peak_dbm: f64,
}

/// Measured output power against normalized transmitter gain.
/// Interpolation is piecewise linear in (gain, dBm).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    rows: Vec<CalibrationRow>,
}

impl Default for CalibrationTable {
    fn default() -> Self {
        Self::usrp_n210()
    }
}

impl CalibrationTable {
    /// The bundled laboratory measurement of a USRP N210 output.
    pub fn usrp_n210() -> Self {
        Self::parse(USRP_N210).expect("bundled calibration table is valid")
    }

    pub fn from_rows(rows: Vec<CalibrationRow>) -> Result<Self, RegError> {
        if rows.len() < 2 {
            return Err(RegError::Table("need at least two rows".into()));
        }
        for w in rows.windows(2) {
            if !(w[1].gain > w[0].gain) {
                return Err(RegError::Table(format!("gains not increasing at {}", w[1].gain)));
            }
            if !(w[1].channel_power_dbm > w[0].channel_power_dbm) {
                return Err(RegError::Table(format!("channel power not increasing at gain {}", w[1].gain)));
            }
        }
        Ok(Self { rows })
    }

    /// Parses CSV text with columns gain, channel_power_dbm, psd_dbm_hz, peak_dbm.
    pub fn parse(text: &str) -> Result<Self, RegError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| RegError::Table(e.to_string()))?;
            if rec.len() != 4 {
                return Err(RegError::Table(format!("expected 4 columns, got {}", rec.len())));
            }
            let v: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| RegError::Table(format!("bad number '{f}'"))))
                .collect::<Result<_, _>>()?;
            rows.push(CalibrationRow { gain: v[0], channel_power_dbm: v[1], psd_dbm_hz: v[2], peak_dbm: v[3] });
        }
        Self::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self, RegError> {
        let text = std::fs::read_to_string(path).map_err(|e| RegError::Table(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn rows(&self) -> &[CalibrationRow] {
        &self.rows
    }

    fn gain_range(&self) -> (f64, f64) {
        (self.rows[0].gain, self.rows[self.rows.len() - 1].gain)
    }

    fn power_range(&self) -> (f64, f64) {
        (self.rows[0].channel_power_dbm, self.rows[self.rows.len() - 1].channel_power_dbm)
    }

    /// Channel power per 100 kHz, dBm, at normalized gain `g`.
    pub fn gain_to_power(&self, g: f64) -> Result<f64, RegError> {
        let (lo, hi) = self.gain_range();
        if !(g >= lo && g <= hi) {
            return Err(RegError::Config(format!("gain {g} outside [{lo}, {hi}]")));
        }
        let i = self.rows.partition_point(|r| r.gain <= g).clamp(1, self.rows.len() - 1);
        let (a, b) = (self.rows[i - 1], self.rows[i]);
        let t = (g - a.gain) / (b.gain - a.gain);
        Ok(a.channel_power_dbm + t * (b.channel_power_dbm - a.channel_power_dbm))
    }

    /// Inverse of [`gain_to_power`](Self::gain_to_power) on the same polyline.
    pub fn power_to_gain(&self, p_dbm: f64) -> Result<f64, RegError> {
        let (lo, hi) = self.power_range();
        if !(p_dbm >= lo && p_dbm <= hi) {
            return Err(RegError::OutOfCalibration(p_dbm));
        }
        let i = self.rows.partition_point(|r| r.channel_power_dbm <= p_dbm).clamp(1, self.rows.len() - 1);
        let (a, b) = (self.rows[i - 1], self.rows[i]);
        let t = (p_dbm - a.channel_power_dbm) / (b.channel_power_dbm - a.channel_power_dbm);
        Ok(a.gain + t * (b.gain - a.gain))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn knots_are_exact() {
        let cal = CalibrationTable::usrp_n210();
        assert_eq!(cal.rows().len(), 11);
        assert_eq!(cal.gain_to_power(0.5).unwrap(), 3.8);
        assert_eq!(cal.gain_to_power(0.0).unwrap(), -11.0);
        assert_eq!(cal.gain_to_power(1.0).unwrap(), 18.2);
        for r in cal.rows() {
            assert!((cal.gain_to_power(r.gain).unwrap() - r.channel_power_dbm).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_and_inverse() {
        let cal = CalibrationTable::usrp_n210();
        assert!((cal.gain_to_power(0.45).unwrap() - 2.4).abs() < 1e-12);
        let g = cal.power_to_gain(17.6).unwrap();
        assert!(g > 0.9 && g < 1.0, "{g}");
        assert_eq!(cal.power_to_gain(18.3), Err(RegError::OutOfCalibration(18.3)));
        assert_eq!(cal.power_to_gain(-11.1), Err(RegError::OutOfCalibration(-11.1)));
        assert!(cal.gain_to_power(1.01).is_err());
    }

    #[test]
    fn psd_column_is_channel_power_less_50_db() {
        // 10 log10(100 kHz / 1 Hz) = 50 dB; the measured table holds to 0.1 dB.
        for r in CalibrationTable::usrp_n210().rows() {
            assert!((r.channel_power_dbm - 50.0 - r.psd_dbm_hz).abs() <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn rejects_non_monotone_tables() {
        assert!(CalibrationTable::parse("gain,p,psd,peak\n0,1,0,0\n0.5,1,0,0\n").is_err());
        assert!(CalibrationTable::parse("gain,p,psd,peak\n0.5,1,0,0\n0.1,2,0,0\n").is_err());
        assert!(CalibrationTable::parse("gain,p,psd,peak\n0,1,0,0\n").is_err());
        assert!(CalibrationTable::parse("gain,p,psd,peak\n0,x,0,0\n1,2,0,0\n").is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_round_trip(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let cal = CalibrationTable::usrp_n210();
            let (lo, hi) = (a.min(b), a.max(b));
            let (plo, phi) = (cal.gain_to_power(lo).unwrap(), cal.gain_to_power(hi).unwrap());
            if hi > lo {
                prop_assert!(phi > plo);
            }
            let back = cal.gain_to_power(cal.power_to_gain(plo).unwrap()).unwrap();
            prop_assert!((back - plo).abs() < 1e-9);
        }
    }
}
