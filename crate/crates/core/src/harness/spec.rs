use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    UniformInsert,
    CraftedInsert,
    ZeroResultLookup,
    ExistingLookup,
    Delete,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 5] = [
        PhaseKind::UniformInsert,
        PhaseKind::CraftedInsert,
        PhaseKind::ZeroResultLookup,
        PhaseKind::ExistingLookup,
        PhaseKind::Delete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhaseKind::UniformInsert => "uniform-insert",
            PhaseKind::CraftedInsert => "crafted-insert",
            PhaseKind::ZeroResultLookup => "zero-result-lookup",
            PhaseKind::ExistingLookup => "existing-lookup",
            PhaseKind::Delete => "delete",
        }
    }

    pub fn is_lookup(self) -> bool {
        matches!(self, PhaseKind::ZeroResultLookup | PhaseKind::ExistingLookup)
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhaseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown phase kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    /// Operations issued. For crafted inserts this caps the crafted keys.
    pub count: u64,
    /// Operations timed together as one latency sample.
    pub batch_size: u64,
    pub rng_seed: u64,
    /// Crafted inserts only: fraction of live runs whose filters are targeted.
    pub fraction: f64,
}

impl Phase {
    pub fn new(kind: PhaseKind, count: u64, rng_seed: u64) -> Self {
        Phase {
            kind,
            count,
            batch_size: 1,
            rng_seed,
            fraction: 1.0,
        }
    }

    pub fn batch_size(mut self, batch_size: u64) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn fraction(mut self, fraction: f64) -> Self {
        self.fraction = fraction;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub phases: Vec<Phase>,
}

impl WorkloadSpec {
    pub fn new(phases: Vec<Phase>) -> Self {
        WorkloadSpec { phases }
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.phases.iter().enumerate() {
            let bad = |what: &str| Err(Error::InvalidSpec(format!("phase {i} ({}): {what}", p.kind)));
            if p.count == 0 {
                return bad("count must be positive");
            }
            if p.batch_size == 0 {
                return bad("batch_size must be positive");
            }
            if !(0.0..=1.0).contains(&p.fraction) {
                return bad("fraction must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` list. Each `phase = <kind>` line opens a
    /// new phase and the keys after it (`count`, `batch_size`, `rng_seed`,
    /// `fraction`) apply to that phase. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut phases: Vec<(Phase, bool)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |what: String| Error::InvalidSpec(format!("line {}: {what}", n + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            if key == "phase" {
                let kind = value.parse::<PhaseKind>().map_err(|e| err(e.to_string()))?;
                let seed = phases.len() as u64;
                let count = if kind == PhaseKind::CraftedInsert { u64::MAX } else { 0 };
                phases.push((Phase::new(kind, count, seed), kind == PhaseKind::CraftedInsert));
                continue;
            }
            let (phase, has_count) = phases
                .last_mut()
                .ok_or_else(|| err(format!("`{key}` before the first phase")))?;
            let int = || value.replace('_', "").parse::<u64>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "count" => {
                    phase.count = int()?;
                    *has_count = true;
                }
                "batch_size" => phase.batch_size = int()?,
                "rng_seed" | "seed" => phase.rng_seed = int()?,
                "fraction" => {
                    phase.fraction = value.parse().map_err(|e| err(format!("fraction: {e}")))?
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if let Some(i) = phases.iter().position(|(_, has)| !has) {
            return Err(Error::InvalidSpec(format!("phase {i} has no count")));
        }
        let spec = WorkloadSpec::new(phases.into_iter().map(|(p, _)| p).collect());
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.phases {
            out.push_str(&format!("phase = {}\n", p.kind));
            if p.count != u64::MAX {
                out.push_str(&format!("count = {}\n", p.count));
            }
            out.push_str(&format!("batch_size = {}\nrng_seed = {}\n", p.batch_size, p.rng_seed));
            if p.kind == PhaseKind::CraftedInsert {
                out.push_str(&format!("fraction = {}\n", p.fraction));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_phase_list() {
        let spec = WorkloadSpec::parse(
            "# load then probe\nphase = uniform-insert\ncount = 1_000\nbatch_size = 10\nrng_seed = 7\n\n\
             phase = crafted-insert\nfraction = 0.5\nphase = zero-result-lookup\ncount = 50\n",
        )
        .unwrap();
        assert_eq!(spec.phases.len(), 3);
        assert_eq!(spec.phases[0], Phase::new(PhaseKind::UniformInsert, 1000, 7).batch_size(10));
        assert_eq!(spec.phases[1].count, u64::MAX);
        assert_eq!(spec.phases[1].fraction, 0.5);
        assert_eq!(spec.phases[2].rng_seed, 2);
        assert_eq!(WorkloadSpec::parse(&spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn rejects_bad_specs() {
        for text in [
            "count = 5",
            "phase = scan\ncount = 5",
            "phase = delete",
            "phase = delete\ncount = 0",
            "phase = delete\ncount = 5\nbatch_size = 0",
            "phase = delete\ncount = 5\nspeed = 3",
            "phase = crafted-insert\nfraction = 2",
            "phase delete",
        ] {
            assert!(matches!(WorkloadSpec::parse(text), Err(Error::InvalidSpec(_))), "{text}");
        }
    }

    #[test]
    fn empty_text_is_empty_spec() {
        assert!(WorkloadSpec::parse("# nothing\n\n").unwrap().is_empty());
    }
}
