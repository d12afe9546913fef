use crate::channelsim::ChannelProfile;
use crate::framing::FrameConfig;
use crate::rxfront::SyncConfig;
use crate::signal::C64;
use crate::spectral::{DEFAULT_FFT_SIZE, DEFAULT_ITERATIONS};
use crate::txmodem::{ModParams, Scheme};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),
    #[error("bad value '{value}' for '{key}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Everything needed for one link run or sweep. Station fields (antenna
/// gains, heights, transmit power) are carried for the record only.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    /// Payload source; when absent a pseudo-random payload of `file_size`
    /// bytes is generated from the seed.
    pub input_path: Option<PathBuf>,
    pub file_size: usize,
    /// Where received payload bytes are written.
    pub output_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
    pub scheme: Scheme,
    pub modulation: ModParams,
    pub sync: SyncConfig,
    pub channel: ChannelProfile,
    pub frame: FrameConfig,
    pub n_discarded: u64,
    pub seed: u64,
    pub fc_hz: f64,
    pub bw_hz: f64,
    pub fft_size: usize,
    pub fft_iterations: usize,
    /// Access-code mismatches tolerated by the correlator.
    pub max_bit_errors: u32,
    /// Alternating bits sent ahead of the first packet so the receiver loops
    /// settle before any frame arrives.
    pub lead_in_bits: usize,
    pub sweep_snr_db: Vec<f64>,
    pub repeats: usize,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub node_height_m: f64,
    pub bs_height_m: f64,
}

/// Keys that reshape the modulation profile; applied before receiver
/// defaults are derived from it.
const MODULATION_KEYS: [&str; 6] = ["sps", "symbol_rate", "rolloff", "bt", "mod_index", "filter_span"];

impl CampaignConfig {
    pub fn default_for(scheme: Scheme) -> Self {
        let modulation = ModParams::default_for(scheme);
        Self {
            input_path: None,
            file_size: 364_000,
            output_path: None,
            csv_path: None,
            scheme,
            sync: SyncConfig::default_for(&modulation),
            modulation,
            channel: ChannelProfile::ideal(),
            frame: FrameConfig::default(),
            n_discarded: 0,
            seed: 1,
            fc_hz: 600e6,
            bw_hz: 100e3,
            fft_size: DEFAULT_FFT_SIZE,
            fft_iterations: DEFAULT_ITERATIONS,
            max_bit_errors: 2,
            lead_in_bits: 256,
            sweep_snr_db: (0..=10).map(|k| f64::from(2 * k)).collect(),
            repeats: 3,
            tx_power_dbm: 12.6,
            tx_gain_dbi: 5.0,
            rx_gain_dbi: 5.0,
            node_height_m: 2.0,
            bs_height_m: 12.0,
        }
    }

    /// The same campaign run with another scheme. Modulation and receiver
    /// settings revert to that scheme's defaults, keeping the oversampling.
    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        let modulation = ModParams { sps: self.modulation.sps, ..ModParams::default_for(scheme) };
        Self { scheme, sync: SyncConfig::default_for(&modulation), modulation, ..self.clone() }
    }

    /// Builds a configuration from ordered `(key, value)` pairs; later pairs
    /// win. The scheme is applied first, then modulation keys, then receiver
    /// defaults are derived and the remaining keys applied on top.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let scheme = match pairs.iter().rev().find(|(k, _)| k == "scheme") {
            Some((k, v)) => v.parse().map_err(|e| bad(k, v, e))?,
            None => Scheme::Gmsk,
        };
        let mut cfg = Self::default_for(scheme);
        for (k, v) in pairs.iter().filter(|(k, _)| MODULATION_KEYS.contains(&k.as_str())) {
            cfg.set(k, v)?;
        }
        cfg.sync = SyncConfig::default_for(&cfg.modulation);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "scheme" && !MODULATION_KEYS.contains(&k.as_str())) {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "scheme" => {
                self.scheme = v.parse().map_err(|e| bad(key, v, e))?;
                self.modulation = ModParams::default_for(self.scheme);
                self.sync = SyncConfig::default_for(&self.modulation);
            }
            "input" => self.input_path = Some(PathBuf::from(v)),
            "output" => self.output_path = Some(PathBuf::from(v)),
            "csv" => self.csv_path = Some(PathBuf::from(v)),
            "file_size" => self.file_size = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "packet_len" => self.frame.payload_len = num(key, v)?,
            "n_discarded" => self.n_discarded = num(key, v)?,
            "fc_hz" => self.fc_hz = num(key, v)?,
            "bw_hz" => self.bw_hz = num(key, v)?,
            "sps" => self.modulation.sps = num(key, v)?,
            "symbol_rate" => self.modulation.symbol_rate = num(key, v)?,
            "rolloff" => self.modulation.rrc_rolloff = num(key, v)?,
            "bt" => self.modulation.gauss_bt = num(key, v)?,
            "mod_index" => self.modulation.mod_index = num(key, v)?,
            "filter_span" => self.modulation.filter_span = num(key, v)?,
            "agc_reference" => self.sync.agc_reference = num(key, v)?,
            "agc_rate" => self.sync.agc_rate = num(key, v)?,
            "lpf_cutoff" => self.sync.lpf_cutoff = num(key, v)?,
            "lpf_transition" => self.sync.lpf_transition = num(key, v)?,
            "timing_bw" => self.sync.timing_loop_bw = num(key, v)?,
            "cma_taps" => self.sync.cma_taps = num(key, v)?,
            "cma_mu" => self.sync.cma_mu = num(key, v)?,
            "costas_bw" => self.sync.costas_loop_bw = num(key, v)?,
            "snr_db" => self.channel.snr_db = parse_db(key, v)?,
            "cfo_hz" => self.channel.cfo_hz = num(key, v)?,
            "phase0" => self.channel.phase0 = num(key, v)?,
            "phase_noise_std" => self.channel.phase_noise_std = num(key, v)?,
            "gain_db" => self.channel.gain_db = num(key, v)?,
            "taps" => self.channel.taps = parse_taps(v).map_err(|r| bad(key, v, r))?,
            "fft_size" => self.fft_size = num(key, v)?,
            "fft_iterations" => self.fft_iterations = num(key, v)?,
            "max_bit_errors" => self.max_bit_errors = num(key, v)?,
            "lead_in_bits" => self.lead_in_bits = num(key, v)?,
            "sweep" => self.sweep_snr_db = parse_snr_list(v).map_err(|r| bad(key, v, r))?,
            "repeats" => self.repeats = num(key, v)?,
            "tx_power_dbm" => self.tx_power_dbm = num(key, v)?,
            "tx_gain_dbi" => self.tx_gain_dbi = num(key, v)?,
            "rx_gain_dbi" => self.rx_gain_dbi = num(key, v)?,
            "node_height_m" => self.node_height_m = num(key, v)?,
            "bs_height_m" => self.bs_height_m = num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if self.modulation.scheme != self.scheme {
            return Err(ConfigError::Invalid("modulation parameters belong to another scheme".into()));
        }
        self.modulation.validate().map_err(|e| invalid(&e))?;
        self.sync.validate().map_err(|e| invalid(&e))?;
        self.frame.validate().map_err(|e| invalid(&e))?;
        self.channel.validate(self.modulation.sample_rate()).map_err(|e| invalid(&e))?;
        if self.frame.payload_len == 0 {
            return Err(ConfigError::Invalid("packet length must be positive".into()));
        }
        if self.fft_size < 2 || self.fft_iterations == 0 {
            return Err(ConfigError::Invalid("FFT size must be >= 2 and iterations >= 1".into()));
        }
        if self.max_bit_errors > 3 {
            return Err(ConfigError::Invalid("max_bit_errors must be at most 3".into()));
        }
        if !self.lead_in_bits.is_multiple_of(2) {
            return Err(ConfigError::Invalid("lead_in_bits must be even".into()));
        }
        if self.repeats == 0 {
            return Err(ConfigError::Invalid("repeats must be at least 1".into()));
        }
        if !(self.bw_hz > 0.0 && self.bw_hz < self.modulation.sample_rate()) {
            return Err(ConfigError::Invalid(format!(
                "measurement bandwidth {} Hz must be below the sample rate",
                self.bw_hz
            )));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

/// Splits `key = value` lines into ordered pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn bad(key: &str, value: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), value: value.to_string(), reason: reason.to_string() }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| bad(key, v, e))
}

fn parse_db(key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "none" | "off" => Ok(f64::INFINITY),
        _ => num(key, v),
    }
}

/// `start:stop:step` (inclusive) or a comma-separated list of dB values.
pub fn parse_snr_list(v: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let p = |s: &str| s.parse::<f64>().map_err(|e| format!("'{s}': {e}"));
        let (start, stop, step) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err("range needs start <= stop and a positive step".into());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + step * i as f64).collect());
    }
    if parts.len() != 1 {
        return Err("expected start:stop:step or a comma-separated list".into());
    }
    v.split(',')
        .map(|s| {
            let s = s.trim();
            if s.eq_ignore_ascii_case("inf") {
                Ok(f64::INFINITY)
            } else {
                s.parse::<f64>().map_err(|e| format!("'{s}': {e}"))
            }
        })
        .collect()
}

/// Comma-separated complex taps such as `1, 0.3-0.1j, 0.05j`.
fn parse_taps(v: &str) -> Result<Vec<C64>, String> {
    let taps: Vec<C64> = v.split(',').map(|s| parse_complex(s.trim())).collect::<Result<_, _>>()?;
    if taps.is_empty() {
        return Err("no taps".into());
    }
    Ok(taps)
}

fn parse_complex(s: &str) -> Result<C64, String> {
    let err = || format!("cannot parse complex number '{s}'");
    let Some(body) = s.strip_suffix('j').or_else(|| s.strip_suffix('i')) else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| err());
    };
    // Split at the last sign that is not the leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (body[..i].parse::<f64>().map_err(|_| err())?, &body[i..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| err())?,
    };
    Ok(C64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_campaign() {
        let c = CampaignConfig::default_for(Scheme::Gmsk);
        assert_eq!(c.file_size, 364_000);
        assert_eq!(c.frame.payload_len, 500);
        assert_eq!(c.fc_hz, 600e6);
        assert_eq!(c.bw_hz, 100e3);
        assert_eq!((c.tx_power_dbm, c.tx_gain_dbi), (12.6, 5.0));
        c.validate().unwrap();
    }

    #[test]
    fn parse_text() {
        let text = "
            # link settings
            scheme = dqpsk
            snr_db = 12.5   # in-band
            taps = 1, 0.3-0.1j
            sps = 8
            sweep = 0:20:2
            packet_len = 100
        ";
        let c = CampaignConfig::parse(text).unwrap();
        assert_eq!(c.scheme, Scheme::Dqpsk);
        assert_eq!(c.modulation.sps, 8);
        assert_eq!(c.channel.snr_db, 12.5);
        assert_eq!(c.channel.taps, vec![C64::new(1.0, 0.0), C64::new(0.3, -0.1)]);
        assert_eq!(c.sweep_snr_db.len(), 11);
        assert_eq!(c.frame.payload_len, 100);
        // Receiver defaults follow the overridden modulation profile.
        assert_eq!(c.sync, SyncConfig::default_for(&c.modulation));
        c.validate().unwrap();
    }

    #[test]
    fn later_keys_win_and_sync_overrides_stick() {
        let pairs: Vec<(String, String)> = [("scheme", "dbpsk"), ("timing_bw", "0.01"), ("sps", "6"), ("seed", "3"), ("seed", "4")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let c = CampaignConfig::from_pairs(&pairs).unwrap();
        assert_eq!(c.sync.timing_loop_bw, 0.01);
        assert_eq!(c.modulation.sps, 6);
        assert_eq!(c.seed, 4);
    }

    #[test]
    fn errors() {
        assert!(matches!(CampaignConfig::parse("nonsense = 1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(CampaignConfig::parse("sps = four"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(CampaignConfig::parse("just words"), Err(ConfigError::Syntax { line: 1 })));
        let c = CampaignConfig::parse("max_bit_errors = 5").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn snr_lists() {
        assert_eq!(parse_snr_list("0:20:2").unwrap(), (0..=10).map(|k| f64::from(2 * k)).collect::<Vec<_>>());
        assert_eq!(parse_snr_list("5, 7.5,inf").unwrap(), vec![5.0, 7.5, f64::INFINITY]);
        assert_eq!(parse_snr_list("0:1:0.25").unwrap().len(), 5);
        assert!(parse_snr_list("3:1:1").is_err());
        assert!(parse_snr_list("1:2").is_err());
    }

    #[test]
    fn complex_numbers() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("-0.5+2j").unwrap(), C64::new(-0.5, 2.0));
        assert_eq!(parse_complex("1e-3-1e-2j").unwrap(), C64::new(1e-3, -1e-2));
        assert_eq!(parse_complex("-j").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("0.25j").unwrap(), C64::new(0.0, 0.25));
        assert!(parse_complex("x+yj").is_err());
    }
}
