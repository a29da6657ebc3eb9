//! Flat `key = value` run configuration.
//!
//! Every command has a fixed key table. Values are layered as
//! default < preset < config file < flags, and each resolved value keeps the
//! layer it came from so the manifest can say which numbers were chosen by
//! the user and which were filled in.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::{json, Value as Json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Simulate,
    Standing,
    Speed,
    Stability,
    Sweep,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Standing => "standing",
            Command::Speed => "speed",
            Command::Stability => "stability",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Command::Simulate,
            "standing" => Command::Standing,
            "speed" => Command::Speed,
            "stability" => Command::Stability,
            "compare" => Command::Compare,
            "sweep" => Command::Sweep,
            _ => return None,
        })
    }
}

/// Where a resolved value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Numerical default of the toolkit.
    Default,
    /// Model choice the paper leaves open; documented, but still a guess.
    Assumed,
    /// Stated in the figure the preset reproduces.
    Preset,
    File,
    Flag,
    /// Set per run by `sweep`.
    Sweep,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::Assumed => "assumed",
            Source::Preset => "preset",
            Source::File => "file",
            Source::Flag => "flag",
            Source::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(usize),
    Word(String),
    List(Vec<f64>),
    Auto,
}

impl Value {
    fn to_json(&self) -> Json {
        match self {
            Value::Num(x) => json!(x),
            Value::Int(n) => json!(n),
            Value::Word(w) => json!(w),
            Value::List(v) => json!(v),
            Value::Auto => json!("auto"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Num,
    /// A number, or `auto` for a value derived from the others.
    NumOrAuto,
    Int,
    Bool,
    Word(&'static [&'static str]),
    /// `a:b:step` (inclusive) or `a,b,c`.
    List,
    /// Free text, checked by the command that uses it.
    Text,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    /// `None` marks a required key.
    default: Option<&'static str>,
    assumed: bool,
}

const fn key(name: &'static str, kind: Kind, default: Option<&'static str>) -> KeySpec {
    KeySpec {
        name,
        kind,
        default,
        assumed: false,
    }
}

const fn assumed(name: &'static str, kind: Kind, default: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: Some(default),
        assumed: true,
    }
}

const BOUNDARY: Kind = Kind::Word(&["noflux", "pinned"]);
const DIFFUSION: Kind = Kind::Word(&["cn", "explicit"]);
const SPLITTING: Kind = Kind::Word(&["strang", "lie"]);

const SIMULATE: &[KeySpec] = &[
    key("model", Kind::Word(&["pqd", "gametes", "reduced", "both"]), Some("pqd")),
    key("S", Kind::Num, None),
    key("r", Kind::Num, None),
    key("s", Kind::Num, Some("0")),
    key("sigma2", Kind::Num, Some("2")),
    key("eps", Kind::Num, Some("0")),
    assumed("init", Kind::Word(&["tanh", "profile", "step"]), "tanh"),
    assumed("offset", Kind::Num, "20"),
    assumed("half_width", Kind::NumOrAuto, "auto"),
    key("dx", Kind::Num, Some("0.1")),
    key("dt", Kind::Num, Some("0.1")),
    key("t_end", Kind::Num, Some("100")),
    key("record_every", Kind::Int, Some("100")),
    key("x_stride", Kind::Int, Some("1")),
    key("boundary", BOUNDARY, Some("noflux")),
    key("diffusion", DIFFUSION, Some("cn")),
    key("splitting", SPLITTING, Some("strang")),
    key("svg", Kind::Bool, Some("true")),
];

const STANDING: &[KeySpec] = &[
    key("S", Kind::Num, None),
    key("r", Kind::Num, None),
    key("method", Kind::Word(&["quadrature", "shooting"]), Some("quadrature")),
    key("x_max", Kind::NumOrAuto, Some("auto")),
    key("dx", Kind::Num, Some("0.05")),
    key("svg", Kind::Bool, Some("true")),
];

const SPEED: &[KeySpec] = &[
    key("S", Kind::Num, None),
    key("r_grid", Kind::List, None),
    key("s", Kind::Num, None),
    key("sigma2", Kind::Num, Some("2")),
    key("width_factor", Kind::Num, Some("40")),
    key("dx", Kind::Num, Some("0.1")),
    key("dt", Kind::Num, Some("0.1")),
    key("t_end", Kind::Num, Some("600")),
    key("transient", Kind::Num, Some("150")),
    key("record_every", Kind::Int, Some("20")),
    key("svg", Kind::Bool, Some("true")),
];

const STABILITY: &[KeySpec] = &[
    key("S", Kind::Num, None),
    key("r", Kind::Num, None),
    key("x_max", Kind::NumOrAuto, Some("auto")),
    key("dx", Kind::Num, Some("0.05")),
    key("k", Kind::Int, Some("4")),
    key("eps_amp", Kind::Num, Some("0")),
    key("perturbation", Kind::Word(&["bump", "odd"]), Some("bump")),
    key("dt", Kind::Num, Some("0.1")),
    key("horizon", Kind::Num, Some("3000")),
    key("svg", Kind::Bool, Some("true")),
];

const COMPARE: &[KeySpec] = &[
    key("S", Kind::Num, None),
    key("r_grid", Kind::List, None),
    key("dx", Kind::Num, Some("0.05")),
    key("eps_pair", Kind::List, Some("1e-3,1e-4")),
    key("svg", Kind::Bool, Some("true")),
];

const SWEEP: &[KeySpec] = &[
    key(
        "command",
        Kind::Word(&["simulate", "standing", "speed", "stability", "compare"]),
        None,
    ),
    key("vary", Kind::Text, None),
    key("values", Kind::List, None),
];

fn table(cmd: Command) -> &'static [KeySpec] {
    match cmd {
        Command::Simulate => SIMULATE,
        Command::Standing => STANDING,
        Command::Speed => SPEED,
        Command::Stability => STABILITY,
        Command::Compare => COMPARE,
        Command::Sweep => SWEEP,
    }
}

/// Configuration problems; all map to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parses `a:b:step` (inclusive, both ends) or a comma list.
pub fn parse_list(s: &str) -> Result<Vec<f64>, ConfigError> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| ConfigError(format!("`{t}` is not a number")))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return err(format!("range `{s}` must be start:stop:step"));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0 && b >= a) {
            return err(format!("range `{s}` needs step > 0 and stop >= start"));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        if n > 100_000 {
            return err(format!("range `{s}` has too many points"));
        }
        // round to 12 significant digits so 0.1 + 3*0.05 prints as 0.25
        let tidy = |x: f64| format!("{x:.12e}").parse::<f64>().unwrap_or(x);
        Ok((0..=n).map(|i| tidy(a + i as f64 * h)).collect())
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
    }
}

fn parse_value(spec: &KeySpec, raw: &str) -> Result<Value, ConfigError> {
    let raw = raw.trim();
    let bad = |what: &str| ConfigError(format!("key `{}`: `{raw}` is not {what}", spec.name));
    match spec.kind {
        Kind::Num => raw.parse().map(Value::Num).map_err(|_| bad("a number")),
        Kind::NumOrAuto if raw == "auto" => Ok(Value::Auto),
        Kind::NumOrAuto => raw.parse().map(Value::Num).map_err(|_| bad("a number or `auto`")),
        Kind::Int => raw.parse().map(Value::Int).map_err(|_| bad("a non-negative integer")),
        Kind::Bool => match raw {
            "true" | "yes" | "1" => Ok(Value::Word("true".into())),
            "false" | "no" | "0" => Ok(Value::Word("false".into())),
            _ => Err(bad("a boolean")),
        },
        Kind::Word(choices) => {
            if choices.contains(&raw) {
                Ok(Value::Word(raw.to_string()))
            } else {
                Err(bad(&format!("one of {}", choices.join("|"))))
            }
        }
        Kind::List => {
            let v = parse_list(raw)?;
            if v.is_empty() {
                Err(bad("a non-empty list"))
            } else {
                Ok(Value::List(v))
            }
        }
        Kind::Text => Ok(Value::Word(raw.to_string())),
    }
}

/// Reads a flat config file: `key = value` lines, `#` comments.
pub fn read_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config `{}`: {e}", path.display())))?;
    parse_text(&text)
}

pub fn parse_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("config line {}: expected `key = value`", lineno + 1));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            _ => err(format!("unknown preset `{s}` (fig1|fig2|fig3)")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    fn command(self) -> Command {
        match self {
            Preset::Fig1 => Command::Simulate,
            Preset::Fig2 => Command::Standing,
            Preset::Fig3 => Command::Speed,
        }
    }

    /// `(key, value, stated)`: stated values come from the figure itself,
    /// the rest are documented choices.
    fn values(self) -> &'static [(&'static str, &'static str, bool)] {
        match self {
            Preset::Fig1 => &[
                ("model", "both", true),
                ("S", "0.1", true),
                ("r", "0.1", true),
                ("s", "0", true),
                ("sigma2", "2", true),
                ("init", "tanh", false),
                ("offset", "20", false),
                ("half_width", "auto", false),
                ("dx", "0.1", false),
                ("dt", "0.1", false),
                ("t_end", "2500", false),
                ("record_every", "1000", false),
                ("x_stride", "5", false),
            ],
            Preset::Fig2 => &[
                ("S", "0.6", true),
                ("r", "0.25", true),
                ("method", "shooting", false),
                ("x_max", "auto", false),
                ("dx", "0.05", false),
            ],
            Preset::Fig3 => &[
                ("S", "0.1", false),
                ("r_grid", "0.1:0.5:0.05", false),
                ("s", "0.01", false),
                ("sigma2", "2", false),
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub value: Value,
    pub source: Source,
}

/// Fully resolved configuration of one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub preset: Option<Preset>,
    pub entries: BTreeMap<String, Entry>,
}

/// One unresolved layer of `(key, raw value)` pairs.
pub type Layer = Vec<(String, String)>;

impl RunConfig {
    /// Resolves the layers against the command's key table. Unknown keys and
    /// missing required keys are errors.
    pub fn resolve(command: Command, preset: Option<Preset>, file: &Layer, flags: &Layer) -> Result<Self, ConfigError> {
        Self::resolve_with(command, preset, file, flags, table(command))
    }

    fn resolve_with(
        command: Command,
        preset: Option<Preset>,
        file: &Layer,
        flags: &Layer,
        keys: &[KeySpec],
    ) -> Result<Self, ConfigError> {
        let spec = |k: &str| keys.iter().find(|s| s.name == k);
        let mut entries = BTreeMap::new();
        for s in keys {
            if let Some(d) = s.default {
                let source = if s.assumed { Source::Assumed } else { Source::Default };
                entries.insert(
                    s.name.to_string(),
                    Entry {
                        value: parse_value(s, d)?,
                        source,
                    },
                );
            }
        }
        let mut layers: Vec<(Layer, Source)> = Vec::new();
        if let Some(p) = preset {
            if p.command() != command {
                return err(format!("preset `{}` belongs to `{}`", p.name(), p.command().name()));
            }
            let part = |stated: bool| -> Layer {
                p.values()
                    .iter()
                    .filter(|v| v.2 == stated)
                    .map(|(k, x, _)| (k.to_string(), x.to_string()))
                    .collect()
            };
            layers.push((part(true), Source::Preset));
            layers.push((part(false), Source::Assumed));
        }
        layers.push((file.clone(), Source::File));
        layers.push((flags.clone(), Source::Flag));
        for (layer, source) in layers {
            for (k, raw) in layer {
                let Some(s) = spec(&k) else {
                    return err(format!("unknown key `{k}` for `{}`", command.name()));
                };
                entries.insert(
                    k,
                    Entry {
                        value: parse_value(s, &raw)?,
                        source,
                    },
                );
            }
        }
        if let Some(missing) = keys.iter().find(|s| !entries.contains_key(s.name)) {
            return err(format!(
                "missing required key `{}` for `{}`",
                missing.name,
                command.name()
            ));
        }
        Ok(Self {
            command,
            preset,
            entries,
        })
    }

    /// For `sweep`: splits the layers into the sweep's own keys and those of
    /// the swept command, resolving both.
    pub fn resolve_sweep(file: &Layer, flags: &Layer) -> Result<(Self, Self), ConfigError> {
        let own = |k: &str| SWEEP.iter().any(|s| s.name == k);
        let split = |l: &Layer| -> (Layer, Layer) { l.iter().cloned().partition(|(k, _)| own(k)) };
        let (file_own, file_rest) = split(file);
        let (flag_own, flag_rest) = split(flags);
        let sweep = Self::resolve_with(Command::Sweep, None, &file_own, &flag_own, SWEEP)?;
        let target = Command::parse(&sweep.word("command")).expect("validated choice");
        let vary = sweep.word("vary");
        if !table(target)
            .iter()
            .any(|s| s.name == vary && matches!(s.kind, Kind::Num | Kind::NumOrAuto | Kind::Int))
        {
            return err(format!("`{vary}` is not a numeric key of `{}`", target.name()));
        }
        // the swept key is supplied per run; give it a placeholder so
        // required-key checks pass
        let mut rest = flag_rest;
        let first = sweep.list("values")[0];
        if !rest.iter().any(|(k, _)| *k == vary) && !file_rest.iter().any(|(k, _)| *k == vary) {
            rest.push((vary.clone(), format!("{first}")));
        }
        let base = Self::resolve(target, None, &file_rest, &rest)?;
        Ok((sweep, base))
    }

    /// Copy with `key` set to `value` from a sweep.
    pub fn with_swept(&self, key: &str, value: f64) -> Result<Self, ConfigError> {
        let spec = table(self.command)
            .iter()
            .find(|s| s.name == key)
            .expect("checked by resolve_sweep");
        let mut out = self.clone();
        let raw = match spec.kind {
            Kind::Int if value >= 0.0 && value.fract() == 0.0 => format!("{}", value as usize),
            Kind::Int => return err(format!("`{key}` needs integer values, got {value}")),
            _ => format!("{value}"),
        };
        out.entries.insert(
            key.to_string(),
            Entry {
                value: parse_value(spec, &raw)?,
                source: Source::Sweep,
            },
        );
        Ok(out)
    }

    fn get(&self, k: &str) -> &Value {
        &self
            .entries
            .get(k)
            .unwrap_or_else(|| panic!("key `{k}` not in table"))
            .value
    }

    pub fn num(&self, k: &str) -> f64 {
        match self.get(k) {
            Value::Num(x) => *x,
            Value::Int(n) => *n as f64,
            v => panic!("key `{k}` is {v:?}, not a number"),
        }
    }

    /// `None` for `auto`.
    pub fn num_or_auto(&self, k: &str) -> Option<f64> {
        match self.get(k) {
            Value::Auto => None,
            _ => Some(self.num(k)),
        }
    }

    pub fn int(&self, k: &str) -> usize {
        match self.get(k) {
            Value::Int(n) => *n,
            v => panic!("key `{k}` is {v:?}, not an integer"),
        }
    }

    pub fn word(&self, k: &str) -> String {
        match self.get(k) {
            Value::Word(w) => w.clone(),
            v => panic!("key `{k}` is {v:?}, not a word"),
        }
    }

    pub fn flag(&self, k: &str) -> bool {
        self.word(k) == "true"
    }

    pub fn list(&self, k: &str) -> Vec<f64> {
        match self.get(k) {
            Value::List(v) => v.clone(),
            v => panic!("key `{k}` is {v:?}, not a list"),
        }
    }

    /// `{key: {"value": .., "source": ..}}`, key-sorted.
    pub fn to_json(&self) -> Json {
        let map: serde_json::Map<String, Json> = self
            .entries
            .iter()
            .map(|(k, e)| {
                (
                    k.clone(),
                    json!({ "value": e.value.to_json(), "source": e.source.name() }),
                )
            })
            .collect();
        Json::Object(map)
    }

    /// Keys whose value is a documented guess rather than a stated parameter.
    pub fn assumed_keys(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, e)| e.source == Source::Assumed)
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Content hash of the resolved values (sources excluded), 12 hex digits.
    pub fn run_id(&self) -> String {
        let values: BTreeMap<&String, Json> = self.entries.iter().map(|(k, e)| (k, e.value.to_json())).collect();
        let canonical = json!({ "command": self.command.name(), "values": values });
        clines_core::pde::run_id(&canonical)[..12].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(pairs: &[(&str, &str)]) -> Layer {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn ranges_are_inclusive_and_tidy() {
        let v = parse_list("0.1:0.5:0.05").unwrap();
        assert_eq!(v.len(), 9);
        assert_eq!(v[3], 0.25);
        assert_eq!(*v.last().unwrap(), 0.5);
        assert_eq!(parse_list("1,2, 3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_list("1:0:0.1").is_err());
        assert!(parse_list("a,b").is_err());
    }

    #[test]
    fn flags_override_file_override_preset() {
        let file = layer(&[("S", "0.5"), ("dx", "0.02")]);
        let flags = layer(&[("dx", "0.01")]);
        let cfg = RunConfig::resolve(Command::Standing, Some(Preset::Fig2), &file, &flags).unwrap();
        assert_eq!(cfg.num("S"), 0.5);
        assert_eq!(cfg.entries["S"].source, Source::File);
        assert_eq!(cfg.num("dx"), 0.01);
        assert_eq!(cfg.entries["dx"].source, Source::Flag);
        assert_eq!(cfg.num("r"), 0.25);
        assert_eq!(cfg.entries["r"].source, Source::Preset);
        assert_eq!(cfg.entries["method"].source, Source::Assumed);
    }

    #[test]
    fn unknown_and_missing_keys_are_rejected() {
        let e = RunConfig::resolve(
            Command::Standing,
            None,
            &layer(&[("S", "0.1"), ("r", "0.1"), ("q", "1")]),
            &vec![],
        );
        assert!(e.unwrap_err().0.contains("unknown key `q`"));
        let e = RunConfig::resolve(Command::Standing, None, &layer(&[("S", "0.1")]), &vec![]);
        assert!(e.unwrap_err().0.contains("missing required key `r`"));
        // a key of another command is unknown here
        let e = RunConfig::resolve(
            Command::Standing,
            None,
            &layer(&[("S", "0.1"), ("r", "0.1"), ("r_grid", "0.1")]),
            &vec![],
        );
        assert!(e.is_err());
    }

    #[test]
    fn preset_must_match_command() {
        assert!(RunConfig::resolve(Command::Speed, Some(Preset::Fig1), &vec![], &vec![]).is_err());
    }

    #[test]
    fn fig1_defaults_are_flagged() {
        let cfg = RunConfig::resolve(Command::Simulate, Some(Preset::Fig1), &vec![], &vec![]).unwrap();
        let assumed = cfg.assumed_keys();
        for k in ["offset", "half_width", "init", "t_end", "dx"] {
            assert!(assumed.contains(&k.to_string()), "{k}");
        }
        assert_eq!(cfg.entries["S"].source, Source::Preset);
    }

    #[test]
    fn run_id_ignores_sources() {
        let a = RunConfig::resolve(Command::Standing, None, &layer(&[("S", "0.6"), ("r", "0.25")]), &vec![]).unwrap();
        let b = RunConfig::resolve(Command::Standing, None, &vec![], &layer(&[("S", "0.6"), ("r", "0.25")])).unwrap();
        assert_eq!(a.run_id(), b.run_id());
        let c = RunConfig::resolve(Command::Standing, None, &vec![], &layer(&[("S", "0.6"), ("r", "0.3")])).unwrap();
        assert_ne!(a.run_id(), c.run_id());
    }

    #[test]
    fn file_syntax() {
        let l = parse_text("# comment\nS = 0.1\n\nr=0.2 # trailing\n").unwrap();
        assert_eq!(l, layer(&[("S", "0.1"), ("r", "0.2")]));
        assert!(parse_text("S 0.1").is_err());
    }

    #[test]
    fn sweep_splits_keys() {
        let flags = layer(&[
            ("command", "standing"),
            ("vary", "r"),
            ("values", "0.1,0.2"),
            ("S", "0.1"),
        ]);
        let (sweep, base) = RunConfig::resolve_sweep(&vec![], &flags).unwrap();
        assert_eq!(sweep.list("values"), vec![0.1, 0.2]);
        assert_eq!(base.command, Command::Standing);
        let run = base.with_swept("r", 0.2).unwrap();
        assert_eq!(run.num("r"), 0.2);
        assert_eq!(run.entries["r"].source, Source::Sweep);
        let bad = layer(&[("command", "standing"), ("vary", "method"), ("values", "1")]);
        assert!(RunConfig::resolve_sweep(&vec![], &bad).is_err());
    }
}
