//! Reply strategies. Each responder turns a conversation's history into reply
//! text; rendering and delivery happen elsewhere.

mod category;
pub mod classifier;
mod generator;
pub mod history;
mod templates;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use category::ScamCategory;
pub use classifier::{
    bundled_corpus, classify, parse_labelled_tsv, train_baseline_classifier, BaselineModel,
    BridgeError, ClassRow, Classification, ClassifierModel, ClassifyResponse, EvalReport,
    ExternalClassifier, HttpClassifier, LabelledText, TrainingError,
};
pub use generator::{
    build_request, compose_generated_reply, GeneratorRequest, GeneratorResponse, GeneratorSettings,
    HttpGenerator, PromptScope, TextGenerator, DEFAULT_MAX_PROMPT_CHARS, DEFAULT_TIMEOUT,
};
pub use history::{Role, Turn};
pub use templates::{compose_template_reply, PoolError, TemplateDraw, TemplatePool, FAKE_NAME_PLACEHOLDER};

use crate::orchestrator::Persona;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponderKind {
    ClassifierTemplate,
    GeneratorBridge,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponderError {
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("generator returned empty text")]
    GenerationEmpty,
    /// The reply could not be produced now; try again on a later poll.
    #[error("deferred: {0}")]
    Defer(String),
}

/// What a responder sees when asked for a reply.
pub struct ReplyContext<'a> {
    pub strategy_id: &'a str,
    pub persona: &'a Persona,
    /// Oldest first; begins with the solicitation.
    pub history: &'a [Turn],
    pub last_template: Option<usize>,
}

impl ReplyContext<'_> {
    pub fn latest_scammer_text(&self) -> &str {
        self.history
            .iter()
            .rev()
            .find(|t| t.role == Role::Scammer)
            .map_or("", |t| t.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplyDraft {
    pub text: String,
    pub template_index: Option<usize>,
    pub category: Option<ScamCategory>,
    pub degraded: bool,
}

pub trait Responder: Send {
    fn kind(&self) -> ResponderKind;

    fn compose(&self, ctx: &ReplyContext<'_>, rng: &mut dyn RngCore) -> Result<ReplyDraft, ResponderError>;
}

/// Classifies the latest scammer message and picks a pre-written reply.
pub struct ClassifierTemplateResponder {
    pub model: ClassifierModel,
    pub pool: TemplatePool,
    pub no_immediate_repeat: bool,
}

impl ClassifierTemplateResponder {
    pub fn bundled() -> Self {
        ClassifierTemplateResponder {
            model: ClassifierModel::BaselineLexical(BaselineModel::bundled()),
            pool: TemplatePool::bundled(),
            no_immediate_repeat: false,
        }
    }
}

impl Responder for ClassifierTemplateResponder {
    fn kind(&self) -> ResponderKind {
        ResponderKind::ClassifierTemplate
    }

    fn compose(&self, ctx: &ReplyContext<'_>, rng: &mut dyn RngCore) -> Result<ReplyDraft, ResponderError> {
        let c = classify(ctx.latest_scammer_text(), &self.model);
        let draw = compose_template_reply(
            c.category,
            rng,
            &self.pool,
            ctx.persona,
            ctx.last_template,
            self.no_immediate_repeat,
        )?;
        Ok(ReplyDraft {
            text: draw.text,
            template_index: Some(draw.index),
            category: Some(c.category),
            degraded: c.degraded,
        })
    }
}

/// Delegates to an external text generator.
pub struct GeneratorResponder {
    pub generator: Box<dyn TextGenerator>,
    pub settings: GeneratorSettings,
}

impl Responder for GeneratorResponder {
    fn kind(&self) -> ResponderKind {
        ResponderKind::GeneratorBridge
    }

    fn compose(&self, ctx: &ReplyContext<'_>, _rng: &mut dyn RngCore) -> Result<ReplyDraft, ResponderError> {
        let text = compose_generated_reply(
            ctx.strategy_id,
            &ctx.persona.fake_name,
            ctx.history,
            self.generator.as_ref(),
            &self.settings,
        )?;
        Ok(ReplyDraft {
            text,
            template_index: None,
            category: None,
            degraded: false,
        })
    }
}
