//! Small reference nets with known stochastic languages.

use crate::eventlog::{EventLog, Trace};
use crate::net::{Label, NetBuilder, StochasticWorkflowNet, WeightVector, WorkflowNet};

fn act(a: &str) -> Label {
    Label::Activity(a.to_string())
}

/// Builder for [`parallel_choice_net`], exposed so tests can perturb it.
pub fn parallel_choice_builder() -> NetBuilder {
    NetBuilder::new()
        .place("source", 1)
        .place("p2", 0)
        .place("p3", 0)
        .place("p4", 0)
        .place("p5", 0)
        .place("sink", 0)
        .transition("a", act("a"))
        .transition("b", act("b"))
        .transition("c", act("c"))
        .transition("d", act("d"))
        .transition("tau", Label::Silent)
        .arc("source", "a")
        .arc("a", "p2")
        .arc("a", "p3")
        .arc("p2", "b")
        .arc("b", "p4")
        .arc("p3", "c")
        .arc("p3", "d")
        .arc("c", "p5")
        .arc("d", "p5")
        .arc("p4", "tau")
        .arc("p5", "tau")
        .arc("tau", "sink")
}

/// `a` followed by `b` in parallel with a choice between `c` and `d`, closed
/// by a silent join. Transition order: a, b, c, d, tau.
pub fn parallel_choice_net() -> WorkflowNet {
    WorkflowNet::infer(parallel_choice_builder().build().expect("static net")).expect("static workflow net")
}

/// Weights under which [`parallel_choice_net`] reproduces [`parallel_choice_log`] exactly.
pub fn parallel_choice_weights() -> WeightVector {
    WeightVector::new(vec![1.0, 0.3, 0.35, 0.35, 1.0]).expect("positive")
}

pub fn parallel_choice_swn() -> StochasticWorkflowNet {
    StochasticWorkflowNet::new(parallel_choice_net(), parallel_choice_weights()).expect("aligned")
}

/// {abc^15, acb^35, abd^15, adb^35}
pub fn parallel_choice_log() -> EventLog {
    let mut log = EventLog::new();
    log.add(Trace::from_chars("abc"), 15);
    log.add(Trace::from_chars("acb"), 35);
    log.add(Trace::from_chars("abd"), 15);
    log.add(Trace::from_chars("adb"), 35);
    log
}

/// Index of each transition of [`nested_loop_net`] by id.
pub mod nested_loop {
    pub const T1: usize = 0;
    pub const T2: usize = 1;
    pub const T3: usize = 2;
    pub const T4: usize = 3;
    pub const T5: usize = 4;
    pub const T6: usize = 5;
    pub const T7: usize = 6;
    pub const A: usize = 7;
    pub const Q: usize = 8;
}

/// A mined-style net over {A, Q} with seven silent transitions: a loop over
/// `A` in parallel with an optional loop over `Q`. Its language is infinite.
///
/// Transition order: t1..t7 (silent), A, Q.
pub fn nested_loop_net() -> WorkflowNet {
    let net = NetBuilder::new()
        .place("source", 1)
        .place("p1", 0)
        .place("p2", 0)
        .place("p3", 0)
        .place("p4", 0)
        .place("p5", 0)
        .place("p6", 0)
        .place("sink", 0)
        .transition("t1", Label::Silent)
        .transition("t2", Label::Silent)
        .transition("t3", Label::Silent)
        .transition("t4", Label::Silent)
        .transition("t5", Label::Silent)
        .transition("t6", Label::Silent)
        .transition("t7", Label::Silent)
        .transition("A", act("A"))
        .transition("Q", act("Q"))
        // split
        .arc("source", "t4")
        .arc("t4", "p2")
        .arc("t4", "p4")
        // A branch: A, optionally repeated through t6
        .arc("p2", "A")
        .arc("A", "p3")
        .arc("p3", "t6")
        .arc("t6", "p2")
        // Q branch: skip via t7, or enter via t3 and repeat through t2
        .arc("p4", "t7")
        .arc("t7", "p1")
        .arc("p4", "t3")
        .arc("t3", "p5")
        .arc("p5", "Q")
        .arc("Q", "p6")
        .arc("p6", "t2")
        .arc("t2", "p5")
        .arc("p6", "t1")
        .arc("t1", "p1")
        // join
        .arc("p1", "t5")
        .arc("p3", "t5")
        .arc("t5", "sink")
        .build()
        .expect("static net");
    WorkflowNet::infer(net).expect("static workflow net")
}

/// {AAAA, AAA, QAQAQ, AA, AAQQA}, each once.
pub fn nested_loop_log() -> EventLog {
    let mut log = EventLog::new();
    for t in ["AAAA", "AAA", "QAQAQ", "AA", "AAQQA"] {
        log.add(Trace::from_chars(t), 1);
    }
    log
}
