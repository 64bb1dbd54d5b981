/// Keys the model is asked to return.
pub const REQUIRED_KEYS: [&str; 9] = [
    "reactants",
    "products",
    "solvent",
    "reagent",
    "catalysts",
    "duration",
    "instruments",
    "operation",
    "yield",
];

/// Appended to the prompt when the previous answer was not valid JSON.
pub const STRICTNESS_DIRECTIVE: &str = "Respond with only the JSON object, strictly following the requested schema.";

pub const FORMAT_DIRECTIVE: &str = "Your final answer should be a structured JSON format including these items: reactants, products, solvent, reagent, catalysts, duration, instruments, operation, and yield. The answer should be \"null\" if you cannot find the expected reaction.";

/// Builds the extraction prompt for reactant `a` and expected reaction `b`,
/// followed by numbered context blocks.
pub fn build_prompt(a: &str, b: &str, context: &[String]) -> String {
    let mut prompt = format!(
        "You are an expert chemist. This document describes the synthetic route or synthetic reaction of the {a}.\n\
         Find the information of the specific reaction {b} and the reactant of the reaction must be {a}.\n\
         {FORMAT_DIRECTIVE}\n\nContext:\n"
    );
    for (i, paragraph) in context.iter().enumerate() {
        prompt.push_str(&format!("[{}] {}\n", i + 1, paragraph.trim()));
    }
    prompt
}

/// The prompt used for every attempt after a malformed answer.
pub fn strict_prompt(prompt: &str) -> String {
    format!("{}\n{STRICTNESS_DIRECTIVE}", prompt.trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_blocks_are_numbered() {
        let p = build_prompt("X", "Y", &["alpha".into(), " beta ".into()]);
        assert!(p.ends_with("Context:\n[1] alpha\n[2] beta\n"));
    }

    #[test]
    fn strict_prompt_appends_directive() {
        let p = strict_prompt("abc\n");
        assert_eq!(p, format!("abc\n{STRICTNESS_DIRECTIVE}"));
    }
}
