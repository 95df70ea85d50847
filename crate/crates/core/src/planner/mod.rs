//! Staged emulation of mixed-operation expressions.
//!
//! Expressions are parsed, each operation is assigned the scheme that can
//! host it, and a schedule alternates between Paillier and ElGamal stages.
//! A trusted agent holding both private keys moves values across stage
//! boundaries by decrypting and re-encrypting them.

mod exec;
mod expr;
mod plan;

pub use exec::{execute_plan, ExecMode};
pub use expr::{parse_expression, BinaryOp, Expr};
pub use plan::{
    action_label, assign_schemes, assign_schemes_with, build_plan, count_operations, Action, Actor,
    AnnotatedExpr, AnnotatedNode, ExecutionPlan, NodeId, NodeKind, Operation, OperationCounts,
    PlanOptions, PlanStep, Source, SourceEncryption, Stage,
};
