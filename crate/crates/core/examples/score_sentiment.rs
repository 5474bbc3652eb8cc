//! Scores a few sentences with the built-in lexicon and turns classifier
//! logits into probabilities.
//!
//! ```text
//! cargo run --example score_sentiment -- "optional text to score"
//! ```

use sentiment_forecast::sentiment::{lexicon_score, softmax_normalize, tokenize, Lexicon};

fn main() -> sentiment_forecast::Result<()> {
    let lexicon = Lexicon::builtin();
    let mut texts: Vec<String> = std::env::args().skip(1).collect();
    if texts.is_empty() {
        texts = vec![
            "Great quarter, deliveries beat expectations!".into(),
            "Recall news is terrible and the stock is not doing well".into(),
            "Earnings call scheduled for Wednesday".into(),
        ];
    }
    println!("{} lexicon entries", lexicon.len());
    for text in &texts {
        let s = lexicon_score(text, &lexicon)?;
        println!(
            "pos {:.3} neg {:.3} neu {:.3} compound {:+.3}  {:?}",
            s.positive,
            s.negative,
            s.neutral,
            s.compound.unwrap_or(0.0),
            tokenize(text)
        );
    }

    let logits = [2.1, -0.7, 0.3];
    let [p, n, u] = softmax_normalize(logits)?;
    println!("logits {logits:?} -> pos {p:.3} neg {n:.3} neu {u:.3}");
    Ok(())
}
