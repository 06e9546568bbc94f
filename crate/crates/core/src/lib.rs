//! Trend detection over timestamped social-media posts.
//!
//! Posts are cleaned and tokenized ([`textprep`]), embedded ([`embed`]),
//! grouped with HDBSCAN ([`cluster`]) and labeled with class-based TF-IDF
//! ([`topics`]). Each post is scored for sentiment ([`sentiment`]); monthly
//! Pulse Potential per topic ([`pulse`]) is the sum of sentiment times
//! engagement, and an additive trend plus seasonality model ([`forecast`])
//! projects each topic forward and calls it growing, diminishing or stable.

pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod forecast;
pub mod pulse;
pub mod sentiment;
pub mod textprep;
pub mod topics;

/// Six-decimal rendering used by every tabular output. Negative zero and
/// values that round to it print as `0.000000`.
pub fn fmt_real(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}
