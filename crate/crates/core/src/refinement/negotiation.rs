//! The AI/human negotiation loop for one term.
//!
//! ```text
//! NoAIDefinition -> AIProposed <-> FeedbackPending
//!                   AIProposed -> Converged | Stalled
//!                   Converged | Stalled -> FeedbackPending
//! ```

use chrono::Duration;

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{CommentId, DefinitionId, GenerationId};
use crate::provenance::{Action, EventDraft, GenerationPurpose};
use crate::vocab::{ActorRef, Definition, DefinitionKind, Disposition, NegotiationState, Phase, TermState};

use super::backend::{GenerationResult, Outcome};
use super::prompt::{build_prompt, PromptBundle, TEMPLATE_VERSION};

/// Every phase change the loop may make. Staying in a phase is not a
/// transition.
pub const TRANSITIONS: [(Phase, Phase); 7] = [
    (Phase::NoAIDefinition, Phase::AIProposed),
    (Phase::AIProposed, Phase::FeedbackPending),
    (Phase::FeedbackPending, Phase::AIProposed),
    (Phase::AIProposed, Phase::Converged),
    (Phase::AIProposed, Phase::Stalled),
    (Phase::Converged, Phase::FeedbackPending),
    (Phase::Stalled, Phase::FeedbackPending),
];

pub fn is_allowed_transition(from: Phase, to: Phase) -> bool {
    from == to || TRANSITIONS.contains(&(from, to))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegotiationPolicy {
    /// Minimum vote score for the AI definition to count as accepted.
    pub acceptance_threshold: i64,
    /// Idle time after which an open proposal is considered stalled.
    pub stall_window: Duration,
}

impl Default for NegotiationPolicy {
    fn default() -> Self {
        Self {
            acceptance_threshold: 2,
            stall_window: Duration::days(14),
        }
    }
}

/// A prompt ready to send, plus the feedback it consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationPlan {
    pub purpose: GenerationPurpose,
    pub bundle: PromptBundle,
    pub feedback: Vec<CommentId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenerationOutcome {
    Created(Definition),
    Revised(Definition),
    Failed { reason: String },
}

impl TermState {
    fn prompt_with(&self, feedback: &[CommentId]) -> Result<PromptBundle> {
        build_prompt(
            &self.term.label,
            self.human_definitions().map(|d| d.body.clone()).collect(),
            self.examples.values().map(|e| e.body.clone()).collect(),
            feedback
                .iter()
                .map(|id| self.comments[id].body.clone())
                .collect(),
        )
    }

    pub fn plan_initial_generation(&self) -> Result<GenerationPlan> {
        if self.ai_definition().is_some() {
            return Err(Error::AiDefinitionExists);
        }
        Ok(GenerationPlan {
            purpose: GenerationPurpose::Initial,
            bundle: self.prompt_with(&[])?,
            feedback: Vec::new(),
        })
    }

    pub fn plan_refinement(&self) -> Result<GenerationPlan> {
        if self.ai_definition().is_none() {
            return Err(Error::NoAIDefinition);
        }
        let pending = &self.negotiation.pending_feedback;
        if self.negotiation.phase != Phase::FeedbackPending || pending.is_empty() {
            return Err(Error::NoPendingFeedback);
        }
        Ok(GenerationPlan {
            purpose: GenerationPurpose::Refinement,
            bundle: self.prompt_with(pending)?,
            feedback: pending.clone(),
        })
    }

    fn change_phase(&mut self, to: Phase, pending: Vec<CommentId>, actor: &ActorRef, now: Timestamp) -> EventDraft {
        let from = self.negotiation.phase;
        debug_assert!(is_allowed_transition(from, to), "{from:?} -> {to:?}");
        self.negotiation.phase = to;
        self.negotiation.pending_feedback = pending.clone();
        self.record(
            actor,
            now,
            Action::NegotiationStateChanged {
                from,
                to,
                pending_feedback: pending,
            },
        )
    }

    /// Queue a feedback comment on the AI definition for the next refinement.
    pub fn submit_feedback(
        &mut self,
        comment_id: &CommentId,
        actor: &ActorRef,
        now: Timestamp,
    ) -> Result<(NegotiationState, EventDraft)> {
        let ai = self.ai_definition().ok_or(Error::NoAIDefinition)?;
        let comment = self
            .comments
            .get(comment_id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown comment {comment_id}")))?;
        if comment.disposition != Disposition::Feedback || comment.target_definition_id != ai.id {
            return Err(Error::InvalidArgument(
                "only feedback on the AI definition can be queued".into(),
            ));
        }
        if self.negotiation.pending_feedback.contains(comment_id) {
            return Err(Error::InvalidArgument(format!("{comment_id} is already queued")));
        }
        let mut pending = self.negotiation.pending_feedback.clone();
        pending.push(comment_id.clone());
        let event = self.change_phase(Phase::FeedbackPending, pending, actor, now);
        Ok((self.negotiation.clone(), event))
    }

    /// Apply a backend answer for `plan`. The plan is re-validated against the
    /// current state since the term may have changed while the backend ran;
    /// feedback queued meanwhile stays pending for the next cycle.
    pub fn complete_generation(
        &mut self,
        plan: &GenerationPlan,
        generation_id: &GenerationId,
        result: &GenerationResult,
        requester: &ActorRef,
        new_definition_id: impl FnOnce() -> Result<DefinitionId>,
        now: Timestamp,
    ) -> Result<(GenerationOutcome, Vec<EventDraft>)> {
        match plan.purpose {
            GenerationPurpose::Initial => {
                if self.ai_definition().is_some() {
                    return Err(Error::AiDefinitionExists);
                }
            }
            GenerationPurpose::Refinement => {
                if self.ai_definition().is_none() {
                    return Err(Error::NoAIDefinition);
                }
                let still_pending = plan
                    .feedback
                    .iter()
                    .all(|c| self.negotiation.pending_feedback.contains(c));
                if self.negotiation.phase != Phase::FeedbackPending || !still_pending {
                    return Err(Error::NoPendingFeedback);
                }
            }
        }
        let ai = ActorRef::ai(&result.backend_id);
        let latency_ms = result.latency.as_millis() as u64;
        let mut events = vec![self.record(
            requester,
            now,
            Action::AIGenerationRequested {
                generation_id: generation_id.clone(),
                backend_id: result.backend_id.clone(),
                purpose: plan.purpose,
                template_version: TEMPLATE_VERSION.to_owned(),
                feedback: plan.feedback.clone(),
                prompt: plan.bundle.rendered.clone(),
            },
        )];
        let body = match &result.outcome {
            Outcome::Failure { reason } => {
                events.push(self.record(
                    &ai,
                    now,
                    Action::AIGenerationFailed {
                        generation_id: generation_id.clone(),
                        backend_id: result.backend_id.clone(),
                        latency_ms,
                        reason: reason.clone(),
                    },
                ));
                return Ok((GenerationOutcome::Failed { reason: reason.clone() }, events));
            }
            Outcome::Success { body } => body,
        };
        if body.trim().is_empty() {
            return Err(Error::BackendUnavailable {
                backend: result.backend_id.clone(),
                detail: "backend returned an empty definition".into(),
            });
        }
        events.push(self.record(
            &ai,
            now,
            Action::AIGenerationSucceeded {
                generation_id: generation_id.clone(),
                backend_id: result.backend_id.clone(),
                latency_ms,
                body: body.clone(),
            },
        ));
        let outcome = match plan.purpose {
            GenerationPurpose::Initial => {
                let (def, event) =
                    self.add_definition(new_definition_id()?, body, &ai, DefinitionKind::Ai, now)?;
                events.push(event);
                GenerationOutcome::Created(def)
            }
            GenerationPurpose::Refinement => {
                let ai_id = self.ai_definition().expect("checked").id.clone();
                let (def, event) = self.revise_definition(&ai_id, body, &ai, now)?;
                events.push(event);
                let leftover: Vec<CommentId> = self
                    .negotiation
                    .pending_feedback
                    .iter()
                    .filter(|c| !plan.feedback.contains(c))
                    .cloned()
                    .collect();
                let to = if leftover.is_empty() {
                    Phase::AIProposed
                } else {
                    Phase::FeedbackPending
                };
                events.push(self.change_phase(to, leftover, &ai, now));
                GenerationOutcome::Revised(def)
            }
        };
        Ok((outcome, events))
    }

    /// Close an open proposal as converged (enough votes) or stalled (idle
    /// for longer than the window). Returns no event when nothing changes.
    pub fn evaluate_convergence(
        &mut self,
        now: Timestamp,
        policy: &NegotiationPolicy,
        actor: &ActorRef,
    ) -> Result<(NegotiationState, Option<EventDraft>)> {
        let ai = self.ai_definition().ok_or(Error::NoAIDefinition)?;
        let score = ai.tally.score;
        if self.negotiation.phase != Phase::AIProposed || !self.negotiation.pending_feedback.is_empty() {
            return Ok((self.negotiation.clone(), None));
        }
        let to = if score >= policy.acceptance_threshold {
            Phase::Converged
        } else if now - self.negotiation.last_activity > policy.stall_window {
            Phase::Stalled
        } else {
            return Ok((self.negotiation.clone(), None));
        };
        let event = self.change_phase(to, Vec::new(), actor, now);
        Ok((self.negotiation.clone(), Some(event)))
    }
}
