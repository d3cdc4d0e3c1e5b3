//! Send one grounded prompt to an OpenAI-compatible chat server.
//!
//! ```text
//! GROUNDQA_BASE_URL=http://localhost:8000 GROUNDQA_MODEL=my-model \
//!     cargo run --example chat_backend -- "What is respite care?"
//! ```
//!
//! The API key, if the server needs one, is read from `LLM_API_KEY`.
//! Without `GROUNDQA_BASE_URL` the example prints the request it would
//! send and exits.

use groundqa::llm_client::HttpChatBackend;
use groundqa::{vanilla_prompt, GenerationBackendConfig, Generator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let question = std::env::args().nth(1).unwrap_or_else(|| "What is respite care?".into());
    let prompt = vanilla_prompt(&question)?;

    let Ok(base_url) = std::env::var("GROUNDQA_BASE_URL") else {
        println!("GROUNDQA_BASE_URL is not set; this is the prompt that would be sent:\n");
        println!("{}", prompt.rendered);
        return Ok(());
    };
    let mut config = GenerationBackendConfig {
        base_url,
        ..Default::default()
    };
    if let Ok(model) = std::env::var("GROUNDQA_MODEL") {
        config.model_name = model;
    }
    let backend = HttpChatBackend::new(config)?;
    let out = backend.generate(&prompt)?;
    println!("{}\n\n({} attempt(s), {} ms)", out.text, out.attempts, out.latency_ms);
    Ok(())
}
