//! Policy grammar for the command line.
//!
//! ```text
//! policy := rule ('>' rule)*        rules for steps 0, 1, …; the last repeats
//! rule   := 'u' | 'tilde-u'         the two stationary rules of ex4
//!         | 'a' LABEL               constant action LABEL
//!         | LABEL ('/' LABEL)*      one action label per state, or one for all
//! ```

use anyhow::{bail, Result};
use rsmdp::{corpus, DecisionRule, MarkovPolicy, Mdp};

fn is_gamble_shape(mdp: &Mdp) -> bool {
    mdp.k() == 3 && mdp.l() == 2
}

pub fn parse_rule(mdp: &Mdp, text: &str) -> Result<DecisionRule> {
    let text = text.trim();
    match text {
        "u" | "tilde-u" if !is_gamble_shape(mdp) => {
            bail!("'{text}' names a rule of the ex4 model (3 states, 2 actions)")
        }
        "u" => return Ok(corpus::ex4_u()),
        "tilde-u" => return Ok(corpus::ex4_tilde_u()),
        _ => {}
    }
    if let Some(label) = text.strip_prefix('a') {
        if let Ok(a) = mdp.action_index(label) {
            return Ok(DecisionRule::constant(a, mdp.k()));
        }
    }
    Ok(mdp.parse_rule(text)?)
}

pub fn parse_policy(mdp: &Mdp, text: &str) -> Result<MarkovPolicy> {
    let mut rules = text
        .split('>')
        .map(|r| parse_rule(mdp, r))
        .collect::<Result<Vec<_>>>()?;
    let tail = rules.pop().expect("split yields at least one part");
    Ok(MarkovPolicy::new(rules, tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        let ex1 = corpus::example1();
        assert_eq!(parse_rule(&ex1, "a3").unwrap(), DecisionRule::constant(2, 3));
        assert_eq!(parse_rule(&ex1, "2").unwrap(), DecisionRule::constant(1, 3));
        assert_eq!(parse_rule(&ex1, "1/2/3").unwrap(), DecisionRule(vec![0, 1, 2]));
        assert!(parse_rule(&ex1, "u").is_err());
        assert!(parse_rule(&ex1, "a7").is_err());

        let ex4 = corpus::example4(0.0);
        let pi = parse_policy(&ex4, "tilde-u>u").unwrap();
        assert_eq!(pi.rules, vec![corpus::ex4_tilde_u()]);
        assert_eq!(pi.tail, corpus::ex4_u());
        assert!(parse_policy(&ex4, "u").unwrap().is_stationary());
    }
}
