//! Re-captioning and in-context example sampling.

use midsmith_backends::{BackendError, ChatBackend};
use midsmith_core::chat::{ChatMessage, ChatRequest, Part, Role};
use midsmith_core::ContentAddress;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fanout;
use crate::{ForgeError, ItemFailure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionedPair {
    pub image_ref: ContentAddress,
    pub caption: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecaptionOutcome {
    /// Successful pairs, in input order.
    pub pairs: Vec<CaptionedPair>,
    pub failures: Vec<ItemFailure>,
}

/// The request sent to the captioner for one image.
pub fn caption_request(image: &ContentAddress, caption_prompt: &str) -> ChatRequest {
    let message = ChatMessage { role: Role::User, parts: vec![Part::text(caption_prompt), Part::image(image)] };
    ChatRequest::single(None, message)
}

/// Caption every image with `chat`. Failed or empty captions are reported
/// per item and do not stop the batch.
pub async fn recaption_corpus(
    images: &[ContentAddress],
    chat: &dyn ChatBackend,
    caption_prompt: &str,
    parallelism: usize,
) -> RecaptionOutcome {
    let results = fanout::ordered(images.iter().enumerate(), parallelism, |(i, img)| async move {
        let caption = chat.complete(&caption_request(img, caption_prompt)).await.and_then(|c| {
            let c = c.trim().to_owned();
            if c.is_empty() {
                Err(BackendError::MalformedResponse("empty caption".into()))
            } else {
                Ok(c)
            }
        });
        (i, img, caption)
    })
    .await;

    let mut out = RecaptionOutcome::default();
    for (i, img, caption) in results {
        match caption {
            Ok(caption) => out.pairs.push(CaptionedPair { image_ref: img.clone(), caption }),
            Err(e) => {
                tracing::warn!(index = i, image = %img, error = %e, "caption failed");
                out.failures.push(ItemFailure::new(i, img.as_str(), &e));
            }
        }
    }
    out
}

/// Draw `n` pairs uniformly without replacement. The result order is the
/// sampling order, so `n == corpus.len()` yields a permutation.
pub fn select_icl_samples(corpus: &[CaptionedPair], n: usize, seed: u64) -> Result<Vec<CaptionedPair>, ForgeError> {
    if n == 0 {
        return Err(ForgeError::InvalidArgument("sample size must be positive".into()));
    }
    if n > corpus.len() {
        return Err(ForgeError::InsufficientCorpus { requested: n, available: corpus.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, corpus.len(), n).into_iter().map(|i| corpus[i].clone()).collect())
}
