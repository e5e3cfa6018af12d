//! Turning object contexts into a signed reward table.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manual::ContextBundle;
use crate::provider::{ChoiceQuery, ProviderError, QaProvider};

pub const MIN_REWARD: f64 = 2.0;
pub const MAX_REWARD: f64 = 50.0;
pub const DEFAULT_REWARD: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasonError {
    #[error("reward magnitude {0} outside [{MIN_REWARD}, {MAX_REWARD}]")]
    RewardOutOfRange(f64),
    #[error("context for `{0}` is empty")]
    EmptyContext(String),
    #[error("duplicate rule for `{0}`")]
    DuplicateObject(String),
    #[error("provider failed for `{object}`: {source}")]
    Provider { object: String, source: ProviderError },
    #[error("rewards file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
    Abstain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRule {
    pub object: String,
    pub verdict: Verdict,
    pub reward: f64,
}

impl RewardRule {
    pub fn new(object: impl Into<String>, verdict: Verdict, r_p: f64, r_n: f64) -> Self {
        let reward = match verdict {
            Verdict::Yes => r_p,
            Verdict::No => -r_n,
            Verdict::Abstain => 0.0,
        };
        RewardRule {
            object: object.into(),
            verdict,
            reward,
        }
    }
}

pub fn check_magnitude(r: f64) -> Result<(), ReasonError> {
    if (MIN_REWARD..=MAX_REWARD).contains(&r) {
        Ok(())
    } else {
        Err(ReasonError::RewardOutOfRange(r))
    }
}

/// Object class to auxiliary reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RewardsFile", into = "RewardsFile")]
pub struct RewardTable {
    pub r_p: f64,
    pub r_n: f64,
    rules: BTreeMap<String, RewardRule>,
}

#[derive(Serialize, Deserialize)]
struct RewardsFile {
    r_p: f64,
    r_n: f64,
    rules: Vec<RewardRule>,
}

impl TryFrom<RewardsFile> for RewardTable {
    type Error = ReasonError;
    fn try_from(f: RewardsFile) -> Result<Self, Self::Error> {
        RewardTable::from_rules(f.r_p, f.r_n, f.rules)
    }
}

impl From<RewardTable> for RewardsFile {
    fn from(t: RewardTable) -> Self {
        RewardsFile {
            r_p: t.r_p,
            r_n: t.r_n,
            rules: t.rules.into_values().collect(),
        }
    }
}

impl RewardTable {
    /// Rules are re-derived from their verdicts so the table is always
    /// consistent with `r_p` and `r_n`.
    pub fn from_rules(r_p: f64, r_n: f64, rules: Vec<RewardRule>) -> Result<Self, ReasonError> {
        check_magnitude(r_p)?;
        check_magnitude(r_n)?;
        let mut map = BTreeMap::new();
        for r in rules {
            let rule = RewardRule::new(r.object.clone(), r.verdict, r_p, r_n);
            if map.insert(r.object.clone(), rule).is_some() {
                return Err(ReasonError::DuplicateObject(r.object));
            }
        }
        Ok(RewardTable { r_p, r_n, rules: map })
    }

    pub fn empty(r_p: f64, r_n: f64) -> Result<Self, ReasonError> {
        Self::from_rules(r_p, r_n, Vec::new())
    }

    pub fn reward_for(&self, object: &str) -> Option<f64> {
        self.rules.get(object).map(|r| r.reward)
    }

    pub fn verdict_for(&self, object: &str) -> Option<Verdict> {
        self.rules.get(object).map(|r| r.verdict)
    }

    pub fn rules(&self) -> impl Iterator<Item = &RewardRule> {
        self.rules.values()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn all_abstain(&self) -> bool {
        self.rules.values().all(|r| r.verdict == Verdict::Abstain)
    }

    /// Same verdicts under different magnitudes.
    pub fn with_magnitudes(&self, r_p: f64, r_n: f64) -> Result<Self, ReasonError> {
        Self::from_rules(r_p, r_n, self.rules.values().cloned().collect())
    }

    pub fn load(path: &Path) -> Result<Self, ReasonError> {
        let raw = fs::read_to_string(path).map_err(|e| ReasonError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| ReasonError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), ReasonError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| ReasonError::Io(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| ReasonError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn win_question(object: &str) -> String {
    format!("Should you hit a {object} if you want to win?")
}

/// Rendered context followed by the decision question.
pub fn compose_prompt(ctx: &ContextBundle) -> Result<String, ReasonError> {
    if ctx.rendered.trim().is_empty() {
        return Err(ReasonError::EmptyContext(ctx.object.clone()));
    }
    Ok(format!("{}\nQuestion: {} Answer: ", ctx.rendered, win_question(&ctx.object)))
}

/// Ask the provider Yes/No. Ties go to No; an abstaining scorer yields 0.
pub fn decide<P: QaProvider + ?Sized>(
    provider: &P,
    ctx: &ContextBundle,
    r_p: f64,
    r_n: f64,
) -> Result<RewardRule, ReasonError> {
    let prompt = compose_prompt(ctx)?;
    let verdict = match provider.score_choices(&ChoiceQuery::yes_no(prompt)) {
        Ok(s) => {
            if s.scores[0] > s.scores[1] {
                Verdict::Yes
            } else {
                Verdict::No
            }
        }
        Err(ProviderError::Abstain) => Verdict::Abstain,
        Err(source) => {
            return Err(ReasonError::Provider {
                object: ctx.object.clone(),
                source,
            })
        }
    };
    Ok(RewardRule::new(ctx.object.clone(), verdict, r_p, r_n))
}

/// Decide every context in parallel.
pub fn build_table<P: QaProvider + ?Sized>(
    provider: &P,
    contexts: &[ContextBundle],
    r_p: f64,
    r_n: f64,
) -> Result<RewardTable, ReasonError> {
    check_magnitude(r_p)?;
    check_magnitude(r_n)?;
    let rules = contexts
        .par_iter()
        .map(|c| decide(provider, c, r_p, r_n))
        .collect::<Result<Vec<_>, _>>()?;
    let table = RewardTable::from_rules(r_p, r_n, rules)?;
    if !table.is_empty() && table.all_abstain() {
        warn!("every object abstained; the auxiliary reward is zero everywhere");
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manual::QaPair;
    use crate::provider::{ChoiceScores, ExtractiveQuery, LexicalProvider};
    use proptest::prelude::*;

    struct Fixed(Result<Vec<f64>, ProviderError>);

    impl QaProvider for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn answer(&self, _: &ExtractiveQuery) -> Result<String, ProviderError> {
            Ok(String::new())
        }
        fn score_choices(&self, _: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
            self.0.clone().map(|s| ChoiceScores { scores: s })
        }
    }

    fn ctx(object: &str, answer: &str) -> ContextBundle {
        ContextBundle::from_pairs(
            object,
            vec![QaPair {
                question: format!("What happens when the player hit a {object}?"),
                answer: answer.into(),
            }],
        )
    }

    #[test]
    fn prompt_appends_win_question() {
        let c = ctx("ghost", "You lose a life.");
        assert_eq!(
            compose_prompt(&c).unwrap(),
            "Question: What happens when the player hit a ghost? Answer: You lose a life.\n\
             Question: Should you hit a ghost if you want to win? Answer: "
        );
    }

    #[test]
    fn empty_context_is_an_error() {
        let c = ContextBundle::from_pairs("ghost", Vec::new());
        assert!(matches!(compose_prompt(&c), Err(ReasonError::EmptyContext(_))));
    }

    #[test]
    fn verdict_mapping() {
        let c = ctx("ghost", "x");
        let r = |s: Result<Vec<f64>, ProviderError>| decide(&Fixed(s), &c, 5.0, 5.0).unwrap();
        assert_eq!(r(Ok(vec![0.9, 0.1])).reward, 5.0);
        assert_eq!(r(Ok(vec![0.1, 0.9])).reward, -5.0);
        let tie = r(Ok(vec![0.5, 0.5]));
        assert_eq!((tie.verdict, tie.reward), (Verdict::No, -5.0));
        let abst = r(Err(ProviderError::Abstain));
        assert_eq!((abst.verdict, abst.reward), (Verdict::Abstain, 0.0));
        assert!(decide(&Fixed(Err(ProviderError::Transport("x".into()))), &c, 5.0, 5.0).is_err());
    }

    #[test]
    fn range_is_closed() {
        let c = [ctx("ghost", "You lose.")];
        for r in [2.0, 5.0, 50.0] {
            assert!(build_table(&LexicalProvider, &c, r, r).is_ok());
        }
        for r in [1.99, 50.01, f64::NAN] {
            assert!(build_table(&LexicalProvider, &c, r, 5.0).is_err());
        }
    }

    #[test]
    fn lexical_dot_maze_verdicts() {
        let cs = [
            ctx("ghost", "You lose a life, so avoid them."),
            ctx("pellet", "You eat it and score points."),
        ];
        let t = build_table(&LexicalProvider, &cs, 5.0, 5.0).unwrap();
        assert_eq!(t.reward_for("ghost"), Some(-5.0));
        assert_eq!(t.reward_for("pellet"), Some(5.0));
        assert_eq!(t.reward_for("fruit"), None);
    }

    #[test]
    fn json_round_trip() {
        let t = RewardTable::from_rules(
            5.0,
            7.0,
            vec![RewardRule::new("ghost", Verdict::No, 5.0, 7.0)],
        )
        .unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<RewardTable>(&s).unwrap(), t);
        assert!(serde_json::from_str::<RewardTable>(r#"{"r_p":1,"r_n":5,"rules":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn reward_is_linear_in_magnitude(
            yes in any::<bool>(),
            rp in MIN_REWARD..=MAX_REWARD,
            rn in MIN_REWARD..=MAX_REWARD,
            k in 0.1f64..1.0,
        ) {
            let verdict = if yes { Verdict::Yes } else { Verdict::No };
            let base = RewardRule::new("x", verdict, rp, rn).reward;
            let (sp, sn) = (rp * k, rn * k);
            let scaled = RewardRule::new("x", verdict, sp, sn).reward;
            prop_assert!((scaled - base * k).abs() < 1e-9);
            prop_assert_eq!(base.signum(), if yes { 1.0 } else { -1.0 });
        }

        #[test]
        fn verdict_survives_positive_scaling(yes in 0.0f64..1.0, no in 0.0f64..1.0, c in 1e-3f64..1e3) {
            // near-ties within rounding of the product are not decidable either way
            prop_assume!(yes == no || (yes - no).abs() > 1e-12);
            let c0 = ctx("ghost", "something happens");
            let a = decide(&Fixed(Ok(vec![yes, no])), &c0, 5.0, 5.0).unwrap();
            let b = decide(&Fixed(Ok(vec![yes * c, no * c])), &c0, 5.0, 5.0).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
        }

        #[test]
        fn decisions_are_deterministic(answer in "[a-z ]{0,40}") {
            let c = ctx("ghost", &format!("you {answer} lose"));
            let a = decide(&LexicalProvider, &c, 5.0, 5.0).unwrap();
            let b = decide(&LexicalProvider, &c, 5.0, 5.0).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
