//! Operator routing topologies.
//!
//! Operators are numbered from 1 in names and documentation and from 0 in
//! code. "A → B" means A phase-modulates B.

use crate::{Error, Result};

/// All six operators are carriers; no modulation.
pub const ADDITIVE: u32 = 0;
/// op6 → op5 → op4 → op3 → op2 → op1, op1 is the only carrier.
pub const STACK6: u32 = 1;
/// op2 → op1, op4 → op3, op6 → op5; carriers are op1, op3, op5.
pub const PAIRS3: u32 = 2;
/// Two operators, op2 → op1, op1 is the carrier.
pub const PAIR2: u32 = 3;

pub const CATALOG: [u32; 4] = [ADDITIVE, STACK6, PAIRS3, PAIR2];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModRouting {
    pub algorithm_id: u32,
    /// `modulators[i]` lists the operators feeding operator `i`'s phase.
    pub modulators: Vec<Vec<usize>>,
    pub carriers: Vec<usize>,
    /// The operator carrying the single self-feedback edge.
    pub feedback: Option<usize>,
    /// Operators whose output never reaches a carrier.
    pub inert: Vec<usize>,
}

impl ModRouting {
    pub fn num_operators(&self) -> usize {
        self.modulators.len()
    }

    pub fn is_carrier(&self, op: usize) -> bool {
        self.carriers.contains(&op)
    }

    /// Evaluation order: every operator appears after all of its modulators.
    pub fn evaluation_order(&self) -> Vec<usize> {
        let n = self.num_operators();
        let mut order = Vec::with_capacity(n);
        let mut state = vec![0u8; n];
        fn visit(op: usize, mods: &[Vec<usize>], state: &mut [u8], order: &mut Vec<usize>) {
            if state[op] == 2 {
                return;
            }
            state[op] = 1;
            for &m in &mods[op] {
                visit(m, mods, state, order);
            }
            state[op] = 2;
            order.push(op);
        }
        for op in 0..n {
            visit(op, &self.modulators, &mut state, &mut order);
        }
        order
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_operators();
        let bad = |msg: String| Err(Error::InvalidConfig(format!("routing: {msg}")));
        if self.carriers.is_empty() {
            return bad("no carriers".into());
        }
        if self.carriers.iter().chain(self.modulators.iter().flatten()).any(|&op| op >= n) {
            return bad("operator index out of range".into());
        }
        // Cycle detection; the feedback edge is not stored in `modulators`.
        let mut state = vec![0u8; n];
        fn cyclic(op: usize, mods: &[Vec<usize>], state: &mut [u8]) -> bool {
            match state[op] {
                1 => return true,
                2 => return false,
                _ => {}
            }
            state[op] = 1;
            if mods[op].iter().any(|&m| cyclic(m, mods, state)) {
                return true;
            }
            state[op] = 2;
            false
        }
        if (0..n).any(|op| cyclic(op, &self.modulators, &mut state)) {
            return bad("modulation graph has a cycle".into());
        }
        let reach = self.reaches_carrier();
        for op in 0..n {
            if !reach[op] && !self.inert.contains(&op) {
                return bad(format!("op{} reaches no carrier and is not inert", op + 1));
            }
        }
        Ok(())
    }

    /// For every operator, whether its output reaches a carrier.
    pub fn reaches_carrier(&self) -> Vec<bool> {
        let n = self.num_operators();
        let mut reach = vec![false; n];
        let mut stack: Vec<usize> = self.carriers.clone();
        while let Some(op) = stack.pop() {
            if reach[op] {
                continue;
            }
            reach[op] = true;
            stack.extend(self.modulators[op].iter().copied());
        }
        reach
    }
}

/// Look up a routing in the catalog.
pub fn algorithm_topology(algorithm_id: u32) -> Result<ModRouting> {
    let routing = match algorithm_id {
        ADDITIVE => ModRouting {
            algorithm_id,
            modulators: vec![Vec::new(); 6],
            carriers: (0..6).collect(),
            feedback: Some(5),
            inert: Vec::new(),
        },
        STACK6 => ModRouting {
            algorithm_id,
            modulators: (0..6).map(|i| if i < 5 { vec![i + 1] } else { Vec::new() }).collect(),
            carriers: vec![0],
            feedback: Some(5),
            inert: Vec::new(),
        },
        PAIRS3 => ModRouting {
            algorithm_id,
            modulators: (0..6)
                .map(|i| if i % 2 == 0 { vec![i + 1] } else { Vec::new() })
                .collect(),
            carriers: vec![0, 2, 4],
            feedback: Some(5),
            inert: Vec::new(),
        },
        PAIR2 => ModRouting {
            algorithm_id,
            modulators: vec![vec![1], Vec::new()],
            carriers: vec![0],
            feedback: Some(1),
            inert: Vec::new(),
        },
        other => return Err(Error::UnsupportedAlgorithm(other)),
    };
    routing.validate()?;
    Ok(routing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_entries_are_valid_and_stable() {
        for id in CATALOG {
            let a = algorithm_topology(id).unwrap();
            assert_eq!(a, algorithm_topology(id).unwrap());
            let order = a.evaluation_order();
            assert_eq!(order.len(), a.num_operators());
            for (pos, &op) in order.iter().enumerate() {
                for m in &a.modulators[op] {
                    assert!(order[..pos].contains(m));
                }
            }
        }
    }

    #[test]
    fn additive_has_no_modulation() {
        let a = algorithm_topology(ADDITIVE).unwrap();
        assert_eq!(a.carriers, vec![0, 1, 2, 3, 4, 5]);
        assert!(a.modulators.iter().all(Vec::is_empty));
    }

    #[test]
    fn stack_is_a_chain_into_op1() {
        let a = algorithm_topology(STACK6).unwrap();
        assert_eq!(a.carriers, vec![0]);
        for i in 0..5 {
            assert_eq!(a.modulators[i], vec![i + 1]);
        }
        assert_eq!(a.evaluation_order(), vec![5, 4, 3, 2, 1, 0]);
    }

    #[test]
    fn pair_and_pairs() {
        let p = algorithm_topology(PAIR2).unwrap();
        assert_eq!(p.num_operators(), 2);
        assert_eq!(p.modulators[0], vec![1]);
        assert_eq!(p.carriers, vec![0]);
        let p3 = algorithm_topology(PAIRS3).unwrap();
        assert_eq!(p3.carriers, vec![0, 2, 4]);
    }

    #[test]
    fn unknown_id_is_rejected() {
        assert!(matches!(
            algorithm_topology(31),
            Err(Error::UnsupportedAlgorithm(31))
        ));
    }

    #[test]
    fn validation_catches_cycles_and_orphans() {
        let cyclic = ModRouting {
            algorithm_id: 99,
            modulators: vec![vec![1], vec![0]],
            carriers: vec![0],
            feedback: None,
            inert: vec![],
        };
        assert!(cyclic.validate().is_err());
        let orphan = ModRouting {
            algorithm_id: 99,
            modulators: vec![vec![], vec![]],
            carriers: vec![0],
            feedback: None,
            inert: vec![],
        };
        assert!(orphan.validate().is_err());
        let marked = ModRouting {
            inert: vec![1],
            ..orphan
        };
        assert!(marked.validate().is_ok());
    }
}
