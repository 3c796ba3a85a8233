//! Outbound rendering, inbound webhook normalization and delivery.

mod delivery;
pub mod html;
mod http;
mod inbound;
mod render;

pub use delivery::{
    deliver_attempt, DeliveryStatus, DeliveryStep, MailProvider, ProviderError, ProviderResponse,
    ScriptedProvider, SendRequest, BACKOFF_MINUTES, MAX_ATTEMPTS,
};
pub use http::HttpProvider;
pub use inbound::{parse_inbound, parse_inbound_json, parse_timestamp, InboundEmail, InboundError, InboundPayload};
pub use render::{
    drop_quoted_lines, lint_no_quote, render_reply, reply_subject, shared_lines, OutboundEmail,
    RenderError, RenderedReply, SIGNOFF,
};
