use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::expr::{BinaryOp, Expr};
use crate::error::{Error, Result};
use crate::Scheme;

/// Homomorphic operation carried by an expression node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operation {
    Add,
    Sub,
    Mul,
    Div,
    /// Paillier multiplication by a plaintext integer constant.
    ScalarMul,
}

impl Operation {
    pub fn scheme(self) -> Scheme {
        match self {
            Operation::Add | Operation::Sub | Operation::ScalarMul => Scheme::Paillier,
            Operation::Mul | Operation::Div => Scheme::ElGamal,
        }
    }

    fn action(self) -> Action {
        match self {
            Operation::Add => Action::Add,
            Operation::Sub => Action::Sub,
            Operation::Mul => Action::Mul,
            Operation::Div => Action::Div,
            Operation::ScalarMul => Action::ScalarMul,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanOptions {
    /// Evaluate `x * <integer literal>` as a Paillier constant multiplication
    /// instead of an ElGamal product.
    pub scalar_literals: bool,
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Variable(String),
    Literal(BigRational),
    /// Plaintext integer operand of a [`Operation::ScalarMul`]; never encrypted.
    Constant(BigInt),
    Op {
        op: Operation,
        lhs: NodeId,
        rhs: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedNode {
    pub kind: NodeKind,
    /// Scheme of the operation, or for leaves the scheme of the consuming
    /// operation.
    pub scheme: Scheme,
}

/// Expression tree flattened in post-order, each node tagged with a scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedExpr {
    nodes: Vec<AnnotatedNode>,
    root: NodeId,
}

impl AnnotatedExpr {
    pub fn nodes(&self) -> &[AnnotatedNode] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &AnnotatedNode {
        &self.nodes[id]
    }
}

pub fn assign_schemes(expr: &Expr) -> AnnotatedExpr {
    assign_schemes_with(expr, PlanOptions::default())
}

/// Tag `+`/`-` nodes Paillier and `*`/`/` nodes ElGamal; leaves inherit the
/// scheme of their consumer.
pub fn assign_schemes_with(expr: &Expr, options: PlanOptions) -> AnnotatedExpr {
    fn integer_literal(e: &Expr) -> Option<BigInt> {
        match e {
            Expr::Literal(v) if v.is_integer() => Some(v.to_integer()),
            _ => None,
        }
    }

    fn leaf(e: &Expr, scheme: Scheme, nodes: &mut Vec<AnnotatedNode>) -> Option<NodeId> {
        let kind = match e {
            Expr::Literal(v) => NodeKind::Literal(v.clone()),
            Expr::Variable(name) => NodeKind::Variable(name.clone()),
            Expr::Binary { .. } => return None,
        };
        nodes.push(AnnotatedNode { kind, scheme });
        Some(nodes.len() - 1)
    }

    fn walk(
        e: &Expr,
        consumer: Scheme,
        options: PlanOptions,
        nodes: &mut Vec<AnnotatedNode>,
    ) -> NodeId {
        let Expr::Binary { op, lhs, rhs } = e else {
            return leaf(e, consumer, nodes).expect("non-binary expression is a leaf");
        };
        let scalar = if options.scalar_literals && *op == BinaryOp::Mul {
            integer_literal(rhs)
                .map(|c| (false, c))
                .or_else(|| integer_literal(lhs).map(|c| (true, c)))
        } else {
            None
        };
        let (operation, l, r) = match scalar {
            Some((constant_on_left, constant)) => {
                let operand = if constant_on_left { rhs } else { lhs };
                let operand = walk(operand, Scheme::Paillier, options, nodes);
                nodes.push(AnnotatedNode {
                    kind: NodeKind::Constant(constant),
                    scheme: Scheme::Paillier,
                });
                (Operation::ScalarMul, operand, nodes.len() - 1)
            }
            None => {
                let operation = match op {
                    BinaryOp::Add => Operation::Add,
                    BinaryOp::Sub => Operation::Sub,
                    BinaryOp::Mul => Operation::Mul,
                    BinaryOp::Div => Operation::Div,
                };
                let l = walk(lhs, operation.scheme(), options, nodes);
                let r = walk(rhs, operation.scheme(), options, nodes);
                (operation, l, r)
            }
        };
        nodes.push(AnnotatedNode {
            kind: NodeKind::Op {
                op: operation,
                lhs: l,
                rhs: r,
            },
            scheme: operation.scheme(),
        });
        nodes.len() - 1
    }

    let mut nodes = Vec::new();
    let root = walk(expr, Scheme::Paillier, options, &mut nodes);
    AnnotatedExpr { nodes, root }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Actor {
    Agent,
    Compute,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actor::Agent => "AGENT",
            Actor::Compute => "COMPUTE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Encrypt,
    Decrypt,
    Add,
    Sub,
    Mul,
    Div,
    ScalarMul,
}

impl Action {
    /// Verb used in rendered plans, e.g. `multiply` in `ElGamal_multiply`.
    pub fn verb(self) -> &'static str {
        match self {
            Action::Encrypt => "encrypt",
            Action::Decrypt => "decrypt",
            Action::Add => "add",
            Action::Sub => "subtract",
            Action::Mul => "multiply",
            Action::Div => "divide",
            Action::ScalarMul => "scalar_multiply",
        }
    }

    /// Short operation name shared with benchmark timing tables.
    pub fn id(self) -> &'static str {
        match self {
            Action::Encrypt => "encrypt",
            Action::Decrypt => "decrypt",
            Action::Add => "add",
            Action::Sub => "sub",
            Action::Mul => "mul",
            Action::Div => "div",
            Action::ScalarMul => "scalar_mul",
        }
    }

    pub fn is_agent_action(self) -> bool {
        matches!(self, Action::Encrypt | Action::Decrypt)
    }

    /// Scheme that can host this action on ciphertexts, if it is homomorphic.
    pub fn compute_scheme(self) -> Option<Scheme> {
        match self {
            Action::Add | Action::Sub | Action::ScalarMul => Some(Scheme::Paillier),
            Action::Mul | Action::Div => Some(Scheme::ElGamal),
            Action::Encrypt | Action::Decrypt => None,
        }
    }
}

/// `Paillier_add`, `ElGamal_decrypt`, ...
pub fn action_label(scheme: Scheme, action: Action) -> String {
    alloc::format!("{scheme}_{}", action.verb())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub actor: Actor,
    pub scheme: Scheme,
    pub action: Action,
    pub inputs: Vec<String>,
    pub output: Option<String>,
}

impl PlanStep {
    pub fn label(&self) -> String {
        action_label(self.scheme, self.action)
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.actor == Actor::Compute {
            f.write_str("  ")?;
        }
        write!(
            f,
            "{}: {} {}",
            self.actor,
            self.label(),
            self.inputs.join(", ")
        )?;
        if let Some(out) = &self.output {
            write!(f, " -> {out}")?;
        }
        Ok(())
    }
}

/// Where a source identifier gets its plaintext value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Variable,
    Literal(BigRational),
    Constant(BigInt),
}

/// One scheme-homogeneous stage of the schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub scheme: Scheme,
    /// Step indices belonging to this stage.
    pub steps: Range<usize>,
    /// Intermediate values carried into this stage by the agent.
    pub reencrypted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionPlan {
    steps: Vec<PlanStep>,
    stages: Vec<Stage>,
    sources: BTreeMap<String, Source>,
    result: String,
    result_scheme: Scheme,
}

impl ExecutionPlan {
    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn sources(&self) -> &BTreeMap<String, Source> {
        &self.sources
    }

    pub fn result(&self) -> (&str, Scheme) {
        (&self.result, self.result_scheme)
    }

    /// Number of stage transitions at which the agent re-encrypts values.
    pub fn reencryption_boundaries(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| !s.reencrypted.is_empty())
            .count()
    }

    #[cfg(test)]
    pub(super) fn steps_mut(&mut self) -> &mut Vec<PlanStep> {
        &mut self.steps
    }

    /// One line per step.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&step.to_string());
            out.push('\n');
        }
        out
    }

    /// Check def-before-use, actor/action separation and scheme consistency
    /// by replaying the plan over symbolic value locations.
    pub fn validate(&self) -> Result<()> {
        let mut encrypted: BTreeSet<(&str, Scheme)> = BTreeSet::new();
        let mut plaintext: BTreeSet<&str> = BTreeSet::new();
        let mut defined: BTreeSet<&str> = self.sources.keys().map(String::as_str).collect();
        let fail = |step: usize, message: String| Err(Error::InvalidPlan { step, message });

        for (index, step) in self.steps.iter().enumerate() {
            match step.actor {
                Actor::Agent if !step.action.is_agent_action() => {
                    return fail(
                        index,
                        alloc::format!("agent cannot perform {}", step.label()),
                    );
                }
                Actor::Compute if step.action.is_agent_action() => {
                    return fail(
                        index,
                        alloc::format!("compute engine cannot perform {}", step.label()),
                    );
                }
                _ => {}
            }
            match step.action {
                Action::Encrypt => {
                    if step.output.is_some() || step.inputs.is_empty() {
                        return fail(
                            index,
                            "encrypt steps list their values as inputs only".into(),
                        );
                    }
                    for id in &step.inputs {
                        let known = match self.sources.get(id) {
                            Some(Source::Constant(_)) => {
                                return fail(
                                    index,
                                    alloc::format!("constant `{id}` must not be encrypted"),
                                )
                            }
                            Some(_) => true,
                            None => plaintext.contains(id.as_str()),
                        };
                        if !known {
                            return fail(
                                index,
                                alloc::format!("agent has no plaintext for `{id}`"),
                            );
                        }
                        encrypted.insert((id, step.scheme));
                    }
                }
                Action::Decrypt => {
                    if step.output.is_some() || step.inputs.is_empty() {
                        return fail(
                            index,
                            "decrypt steps list their values as inputs only".into(),
                        );
                    }
                    for id in &step.inputs {
                        if !encrypted.contains(&(id.as_str(), step.scheme)) {
                            return fail(
                                index,
                                alloc::format!("`{id}` is not encrypted under {}", step.scheme),
                            );
                        }
                        plaintext.insert(id);
                    }
                }
                action => {
                    let scheme = action.compute_scheme().expect("homomorphic action");
                    if scheme != step.scheme {
                        return fail(
                            index,
                            alloc::format!("{} is not a {} operation", step.label(), step.scheme),
                        );
                    }
                    if step.inputs.len() != 2 {
                        return fail(index, "homomorphic operations take two inputs".into());
                    }
                    let (lhs, rhs) = (step.inputs[0].as_str(), step.inputs[1].as_str());
                    if !encrypted.contains(&(lhs, scheme)) {
                        return fail(
                            index,
                            alloc::format!("`{lhs}` is not encrypted under {scheme}"),
                        );
                    }
                    let rhs_ok = if action == Action::ScalarMul {
                        matches!(self.sources.get(rhs), Some(Source::Constant(_)))
                    } else {
                        encrypted.contains(&(rhs, scheme))
                    };
                    if !rhs_ok {
                        return fail(
                            index,
                            alloc::format!("`{rhs}` is not a valid {} operand", step.label()),
                        );
                    }
                    let Some(out) = step.output.as_deref() else {
                        return fail(index, "homomorphic operations need an output".into());
                    };
                    if !defined.insert(out) {
                        return fail(index, alloc::format!("`{out}` is defined twice"));
                    }
                    encrypted.insert((out, scheme));
                }
            }
        }
        match self.steps.last() {
            Some(last)
                if last.action == Action::Decrypt
                    && last.scheme == self.result_scheme
                    && last.inputs == [self.result.clone()] =>
            {
                Ok(())
            }
            _ => fail(
                self.steps.len(),
                "plan must end with the agent decrypting the result".into(),
            ),
        }
    }
}

impl fmt::Display for ExecutionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Intermediate names `p`, `q`, ..., `z`, then `p1`, `q1`, ...
struct NameSupply {
    taken: BTreeSet<String>,
    next: usize,
}

impl NameSupply {
    fn fresh(&mut self) -> String {
        loop {
            let letter = (b'p' + (self.next % 11) as u8) as char;
            let round = self.next / 11;
            self.next += 1;
            let name = if round == 0 {
                letter.to_string()
            } else {
                alloc::format!("{letter}{round}")
            };
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// Greedy staged schedule with a trusted re-encryption agent.
///
/// Each stage runs every operation of its scheme whose inputs are ready,
/// including ones that become ready inside the stage. Between stages the
/// agent decrypts the values whose consumer uses the other scheme and
/// encrypts them under it. Source values are encrypted at first use per
/// scheme. The first stage takes the scheme of the majority of operations
/// that consume only leaves, ties going to Paillier.
pub fn build_plan(annotated: &AnnotatedExpr) -> ExecutionPlan {
    let nodes = annotated.nodes();
    let is_op = |id: NodeId| matches!(nodes[id].kind, NodeKind::Op { .. });

    let mut parent: Vec<Option<NodeId>> = vec![None; nodes.len()];
    for (id, node) in nodes.iter().enumerate() {
        if let NodeKind::Op { lhs, rhs, .. } = node.kind {
            parent[lhs] = Some(id);
            parent[rhs] = Some(id);
        }
    }

    let mut names: Vec<String> = vec![String::new(); nodes.len()];
    let mut sources = BTreeMap::new();
    let variable_names: BTreeSet<String> = nodes
        .iter()
        .filter_map(|n| match &n.kind {
            NodeKind::Variable(name) => Some(name.clone()),
            _ => None,
        })
        .collect();
    let mut literal_index = 0usize;
    for (id, node) in nodes.iter().enumerate() {
        let source = match &node.kind {
            NodeKind::Variable(name) => {
                names[id] = name.clone();
                Source::Variable
            }
            NodeKind::Literal(v) => Source::Literal(v.clone()),
            NodeKind::Constant(c) => Source::Constant(c.clone()),
            NodeKind::Op { .. } => continue,
        };
        if names[id].is_empty() {
            names[id] = loop {
                let candidate = alloc::format!("v{literal_index}");
                literal_index += 1;
                if !variable_names.contains(&candidate) {
                    break candidate;
                }
            };
        }
        sources.insert(names[id].clone(), source);
    }
    let mut supply = NameSupply {
        taken: sources.keys().cloned().collect(),
        next: 0,
    };

    // Scheme under which each executed operation's value currently lives.
    let mut location: Vec<Option<Scheme>> = vec![None; nodes.len()];
    let mut executed_order: Vec<NodeId> = Vec::new();
    let mut encrypted_sources: BTreeSet<(String, Scheme)> = BTreeSet::new();
    let pending_ops = |location: &[Option<Scheme>]| {
        (0..nodes.len())
            .filter(|&id| is_op(id) && location[id].is_none())
            .count()
    };

    let ready = |id: NodeId, scheme: Scheme, location: &[Option<Scheme>]| -> bool {
        let NodeKind::Op { lhs, rhs, .. } = nodes[id].kind else {
            return false;
        };
        location[id].is_none()
            && nodes[id].scheme == scheme
            && [lhs, rhs]
                .iter()
                .all(|&c| !is_op(c) || location[c] == Some(scheme))
    };

    let leaf_only = |scheme: Scheme| {
        (0..nodes.len())
            .filter(|&id| match nodes[id].kind {
                NodeKind::Op { lhs, rhs, .. } => {
                    nodes[id].scheme == scheme && !is_op(lhs) && !is_op(rhs)
                }
                _ => false,
            })
            .count()
    };
    let mut scheme = if leaf_only(Scheme::ElGamal) > leaf_only(Scheme::Paillier) {
        Scheme::ElGamal
    } else {
        Scheme::Paillier
    };

    let mut steps: Vec<PlanStep> = Vec::new();
    let mut stages: Vec<Stage> = Vec::new();
    let root = annotated.root();
    let mut first_stage = true;

    loop {
        let start = steps.len();
        let mut to_encrypt: Vec<String> = Vec::new();
        let mut reencrypted = Vec::new();

        if !first_stage {
            let frontier: Vec<NodeId> = executed_order
                .iter()
                .copied()
                .filter(|&id| {
                    location[id] == Some(scheme.other())
                        && parent[id]
                            .is_some_and(|p| nodes[p].scheme == scheme && location[p].is_none())
                })
                .collect();
            if !frontier.is_empty() {
                let ids: Vec<String> = frontier.iter().map(|&id| names[id].clone()).collect();
                steps.push(PlanStep {
                    actor: Actor::Agent,
                    scheme: scheme.other(),
                    action: Action::Decrypt,
                    inputs: ids.clone(),
                    output: None,
                });
                for &id in &frontier {
                    location[id] = Some(scheme);
                }
                to_encrypt.extend(ids.iter().cloned());
                reencrypted = ids;
            }
        }

        let mut computed: Vec<NodeId> = Vec::new();
        loop {
            let wave: Vec<NodeId> = (0..nodes.len())
                .filter(|&id| ready(id, scheme, &location))
                .collect();
            if wave.is_empty() {
                break;
            }
            for &id in &wave {
                location[id] = Some(scheme);
            }
            computed.extend(wave);
        }

        let mut need_source = |id: NodeId, to_encrypt: &mut Vec<String>| {
            if matches!(nodes[id].kind, NodeKind::Variable(_) | NodeKind::Literal(_))
                && encrypted_sources.insert((names[id].clone(), scheme))
            {
                to_encrypt.push(names[id].clone());
            }
        };
        if first_stage && !is_op(root) {
            need_source(root, &mut to_encrypt);
        }
        for &id in &computed {
            if let NodeKind::Op { lhs, rhs, .. } = nodes[id].kind {
                need_source(lhs, &mut to_encrypt);
                need_source(rhs, &mut to_encrypt);
            }
        }
        if !to_encrypt.is_empty() {
            steps.push(PlanStep {
                actor: Actor::Agent,
                scheme,
                action: Action::Encrypt,
                inputs: to_encrypt,
                output: None,
            });
        }
        for &id in &computed {
            let NodeKind::Op { op, lhs, rhs } = nodes[id].kind else {
                unreachable!()
            };
            names[id] = supply.fresh();
            steps.push(PlanStep {
                actor: Actor::Compute,
                scheme,
                action: op.action(),
                inputs: vec![names[lhs].clone(), names[rhs].clone()],
                output: Some(names[id].clone()),
            });
            executed_order.push(id);
        }
        stages.push(Stage {
            scheme,
            steps: start..steps.len(),
            reencrypted,
        });

        if pending_ops(&location) == 0 {
            break;
        }
        scheme = scheme.other();
        first_stage = false;
    }

    let result_scheme = if is_op(root) {
        nodes[root].scheme
    } else {
        stages[0].scheme
    };
    steps.push(PlanStep {
        actor: Actor::Agent,
        scheme: result_scheme,
        action: Action::Decrypt,
        inputs: vec![names[root].clone()],
        output: None,
    });
    if let Some(last) = stages.last_mut() {
        last.steps.end = steps.len();
    }

    ExecutionPlan {
        steps,
        stages,
        sources,
        result: names[root].clone(),
        result_scheme,
    }
}

/// Whether agent encryptions of source values are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceEncryption {
    Included,
    /// Sources are assumed to arrive already encrypted.
    PreEncrypted,
}

pub type OperationCounts = BTreeMap<(Scheme, Action), usize>;

/// Multiset of actions: agent steps count once per listed value, compute
/// steps once each.
pub fn count_operations(plan: &ExecutionPlan, sources: SourceEncryption) -> OperationCounts {
    let mut counts = OperationCounts::new();
    for step in plan.steps() {
        let n = match (step.actor, step.action) {
            (Actor::Agent, Action::Encrypt) if sources == SourceEncryption::PreEncrypted => step
                .inputs
                .iter()
                .filter(|id| !plan.sources().contains_key(*id))
                .count(),
            (Actor::Agent, _) => step.inputs.len(),
            (Actor::Compute, _) => 1,
        };
        if n > 0 {
            *counts.entry((step.scheme, step.action)).or_default() += n;
        }
    }
    counts
}
