/// RAG prompt asking for a `{"domain", "answer"}` object.
pub const RAG_PROMPT_TEMPLATE: &str = include_str!("../../data/rag_prompt.txt");

/// Substitute `{query}` and `{references}` into the RAG template.
///
/// Placeholders are located in the template only, so braces or placeholder
/// names inside the substituted values are left untouched.
pub fn render_rag_prompt(query: &str, references: &str) -> String {
    render(RAG_PROMPT_TEMPLATE, &[("{query}", query), ("{references}", references)])
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    loop {
        let next = vars
            .iter()
            .filter_map(|(name, value)| rest.find(name).map(|pos| (pos, *name, *value)))
            .min_by_key(|(pos, _, _)| *pos);
        match next {
            Some((pos, name, value)) => {
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + name.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}
