use serde::{Deserialize, Serialize};

/// One boundary crossing as seen from the Normal World.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionEvent {
    /// Logical timestamp: position in the event sequence.
    pub ts: u64,
    pub call: String,
    pub param_sizes: Vec<usize>,
    pub response_kind: String,
    pub response_size: usize,
    /// Response octets when they do not depend on enclave randomness.
    pub content: Option<Vec<u8>>,
}

/// Ordered record of everything the Normal World can observe about enclave
/// calls. Holds shapes and mode-independent responses only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTranscript {
    events: Vec<ExecutionEvent>,
}

/// First point where two transcripts disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub index: usize,
    pub left: Option<ExecutionEvent>,
    pub right: Option<ExecutionEvent>,
}

impl ExecutionTranscript {
    pub(crate) fn push(
        &mut self,
        call: &str,
        param_sizes: Vec<usize>,
        response_kind: &str,
        response_size: usize,
        content: Option<Vec<u8>>,
    ) {
        let ts = self.events.len() as u64;
        self.events.push(ExecutionEvent {
            ts,
            call: call.to_owned(),
            param_sizes,
            response_kind: response_kind.to_owned(),
            response_size,
            content,
        });
    }

    pub fn events(&self) -> &[ExecutionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_divergence(&self, other: &Self) -> Option<Divergence> {
        let n = self.events.len().max(other.events.len());
        (0..n).find_map(|i| {
            let (a, b) = (self.events.get(i), other.events.get(i));
            (a != b).then(|| Divergence {
                index: i,
                left: a.cloned(),
                right: b.cloned(),
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_reports_first_index() {
        let mut a = ExecutionTranscript::default();
        let mut b = ExecutionTranscript::default();
        a.push("seal", vec![3], "envelope", 92, None);
        b.push("seal", vec![3], "envelope", 92, None);
        assert_eq!(a.first_divergence(&b), None);
        a.push("open", vec![92], "opened", 11, Some(vec![1]));
        b.push("secure_io_interrupt", vec![], "ack", 0, None);
        let d = a.first_divergence(&b).unwrap();
        assert_eq!(d.index, 1);
        assert_eq!(d.right.unwrap().call, "secure_io_interrupt");
    }

    #[test]
    fn length_mismatch_is_a_divergence() {
        let mut a = ExecutionTranscript::default();
        let b = ExecutionTranscript::default();
        a.push("shutdown", vec![], "ack", 0, None);
        assert_eq!(a.first_divergence(&b).unwrap().index, 0);
    }
}
