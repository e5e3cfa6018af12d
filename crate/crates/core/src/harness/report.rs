use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{steps_to_reach, CurvePoint};
use super::HarnessError;
use crate::agents::AgentKind;
use crate::env::GameKind;
use crate::reason::RewardTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Baseline,
    Assisted,
    Random,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Assisted => "assisted",
            Arm::Random => "random",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Config,
    Io,
    Provider,
    Divergence,
}

impl FailureKind {
    pub fn exit_code(&self) -> i32 {
        match self {
            FailureKind::Config | FailureKind::Io => 2,
            FailureKind::Provider => 3,
            FailureKind::Divergence => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_score: Option<f64>,
    pub episodes: usize,
    pub correlation: Option<f64>,
    /// Relative to the run's output directory.
    pub curves: Option<String>,
    pub failure: Option<Failure>,
    #[serde(default)]
    pub curve: Vec<CurvePoint>,
}

impl SeedResult {
    pub fn failed(seed: u64, failure: Failure) -> Self {
        SeedResult {
            seed,
            final_score: None,
            episodes: 0,
            correlation: None,
            curves: None,
            failure: Some(failure),
            curve: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    pub seeds: Vec<SeedResult>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Mean of the per-seed correlations that are defined.
    pub correlation: Option<f64>,
    /// Seed-averaged trailing-window learning curve.
    pub curve: Vec<CurvePoint>,
}

impl ArmReport {
    pub fn final_scores(&self) -> Vec<f64> {
        self.seeds.iter().filter_map(|s| s.final_score).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub game: GameKind,
    pub agent: AgentKind,
    pub delayed: bool,
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub window: usize,
    pub r_p: f64,
    pub r_n: f64,
    pub provider: String,
    pub manual: Option<String>,
    pub rewards: Option<RewardTable>,
    pub arms: Vec<ArmReport>,
    pub comparison: Option<Comparison>,
}

impl RunReport {
    pub fn arm(&self, arm: Arm) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn failures(&self) -> impl Iterator<Item = (Arm, &SeedResult)> {
        self.arms
            .iter()
            .flat_map(|a| a.seeds.iter().map(move |s| (a.arm, s)))
            .filter(|(_, s)| !s.ok())
    }

    /// 0 when every seed finished, else the code of the most severe failure.
    pub fn exit_code(&self) -> i32 {
        self.failures()
            .filter_map(|(_, s)| s.failure.as_ref().map(|f| f.kind))
            .max()
            .map_or(0, |k| k.exit_code())
    }

    /// The arm a report stands for in comparisons: assisted when it
    /// produced scores, otherwise baseline.
    pub fn headline(&self) -> Option<&ArmReport> {
        self.arm(Arm::Assisted)
            .filter(|a| a.mean.is_some())
            .or_else(|| self.arm(Arm::Baseline))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        fs::write(path, self.to_json()).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let raw = fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub seeds: usize,
}

impl ArmSummary {
    fn of(label: String, a: &ArmReport) -> Self {
        ArmSummary {
            label,
            mean: a.mean,
            std: a.std,
            seeds: a.final_scores().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub game: GameKind,
    pub steps: u64,
    pub a: ArmSummary,
    pub b: ArmSummary,
    /// (b - a) / |a| in percent.
    pub improvement_pct: Option<f64>,
    /// Steps `a` needs to first reach its own final mean, over the steps
    /// `b` needs to reach that same score.
    pub speedup: Option<f64>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        writeln!(f, "{} ({} steps)", self.game, self.steps)?;
        writeln!(f, "{:<24} {:>10} {:>10} {:>6}", "arm", "mean", "std", "seeds")?;
        for s in [&self.a, &self.b] {
            writeln!(f, "{:<24} {:>10} {:>10} {:>6}", s.label, num(s.mean), num(s.std), s.seeds)?;
        }
        writeln!(
            f,
            "improvement {}",
            self.improvement_pct.map_or("-".to_string(), |v| format!("{v:.1}%"))
        )?;
        write!(f, "speed-up {}", self.speedup.map_or("not reached".to_string(), |v| format!("{v:.2}")))
    }
}

pub fn compare_arms(game: GameKind, steps: u64, a: (&str, &ArmReport), b: (&str, &ArmReport)) -> Comparison {
    let improvement_pct = match (a.1.mean, b.1.mean) {
        (Some(x), Some(y)) if x != 0.0 => Some(100.0 * (y - x) / x.abs()),
        _ => None,
    };
    let speedup = a.1.mean.and_then(|target| {
        let sa = steps_to_reach(&a.1.curve, target)?;
        let sb = steps_to_reach(&b.1.curve, target)?;
        Some(sa as f64 / sb as f64)
    });
    Comparison {
        game,
        steps,
        a: ArmSummary::of(a.0.to_string(), a.1),
        b: ArmSummary::of(b.0.to_string(), b.1),
        improvement_pct,
        speedup,
    }
}

/// Compare the headline arms of two runs; `a` is the reference.
pub fn compare(a: &RunReport, b: &RunReport) -> Result<Comparison, HarnessError> {
    if a.game != b.game {
        return Err(HarnessError::Incomparable(format!("games differ: {} vs {}", a.game, b.game)));
    }
    if a.steps != b.steps {
        return Err(HarnessError::Incomparable(format!("step budgets differ: {} vs {}", a.steps, b.steps)));
    }
    let ha = a.headline().ok_or_else(|| HarnessError::Incomparable("first report has no scored arm".into()))?;
    let hb = b.headline().ok_or_else(|| HarnessError::Incomparable("second report has no scored arm".into()))?;
    Ok(compare_arms(
        a.game,
        a.steps,
        (&format!("a:{}", ha.arm), ha),
        (&format!("b:{}", hb.arm), hb),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(arm: Arm, curve: &[(u64, f64)]) -> ArmReport {
        let curve: Vec<CurvePoint> = curve.iter().map(|&(step, score)| CurvePoint { step, score }).collect();
        ArmReport {
            arm,
            seeds: vec![],
            mean: curve.last().map(|p| p.score),
            std: Some(0.0),
            correlation: None,
            curve,
        }
    }

    fn report(arms: Vec<ArmReport>) -> RunReport {
        RunReport {
            game: GameKind::DotMaze,
            agent: AgentKind::A2c,
            delayed: true,
            steps: 1_000_000,
            seeds: vec![1],
            window: 50,
            r_p: 5.0,
            r_n: 5.0,
            provider: "lexical".into(),
            manual: None,
            rewards: None,
            arms,
            comparison: None,
        }
    }

    #[test]
    fn identical_reports() {
        let r = report(vec![arm(Arm::Assisted, &[(250_000, 1.0), (500_000, 3.0), (1_000_000, 2.0)])]);
        let c = compare(&r, &r).unwrap();
        assert_eq!(c.improvement_pct, Some(0.0));
        assert_eq!(c.speedup, Some(1.0));
    }

    #[test]
    fn half_the_steps_is_double_speed() {
        let base = report(vec![arm(Arm::Baseline, &[(250_000, 100.0), (500_000, 300.0), (750_000, 400.0), (1_000_000, 452.0)])]);
        let rr = report(vec![arm(Arm::Assisted, &[(250_000, 200.0), (500_000, 460.0), (750_000, 520.0), (1_000_000, 580.0)])]);
        let c = compare(&base, &rr).unwrap();
        assert_eq!(c.speedup, Some(2.0));
        assert!((c.improvement_pct.unwrap() - 28.318584).abs() < 1e-4);
        let text = c.to_string();
        assert!(text.contains("28.3%") && text.contains("speed-up 2.00"), "{text}");
    }

    #[test]
    fn never_reaching_is_reported() {
        let base = report(vec![arm(Arm::Baseline, &[(500_000, 5.0), (1_000_000, 10.0)])]);
        let worse = report(vec![arm(Arm::Baseline, &[(500_000, 1.0), (1_000_000, 2.0)])]);
        assert_eq!(compare(&base, &worse).unwrap().speedup, None);
    }

    #[test]
    fn incomparable_configs() {
        let a = report(vec![arm(Arm::Baseline, &[(1, 1.0)])]);
        let mut b = a.clone();
        b.game = GameKind::SkiRun;
        assert!(matches!(compare(&a, &b), Err(HarnessError::Incomparable(_))));
        let mut b = a.clone();
        b.steps = 7;
        assert!(matches!(compare(&a, &b), Err(HarnessError::Incomparable(_))));
    }

    #[test]
    fn exit_code_takes_most_severe_failure() {
        let mut r = report(vec![arm(Arm::Baseline, &[(1, 1.0)])]);
        assert_eq!(r.exit_code(), 0);
        let fail = |kind| SeedResult::failed(1, Failure { kind, message: String::new() });
        r.arms[0].seeds = vec![fail(FailureKind::Provider), fail(FailureKind::Divergence)];
        assert_eq!(r.exit_code(), 4);
    }
}
