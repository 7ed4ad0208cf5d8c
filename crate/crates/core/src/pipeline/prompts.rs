use crate::table::{data_point_blocks, TableCatalog};
use crate::value::ValueType;

/// Instruction line of the answer-producing synthesis prompt (typo kept).
pub const SQL_ANSWER_INSTRUCTION: &str = "Using valid SQLite and understading External Knowledge, answer the following questions for the tables provided above.";

/// Instruction line for the variant that fetches rows for a later LM step.
pub const ROW_RETRIEVAL_INSTRUCTION: &str = "Using valid SQLite and understading External Knowledge, write a query that retrieves the rows relevant to the following question for the tables provided above. Do not compute the final answer; return the rows and columns needed to answer it.";

pub const LIST_ANSWER_INSTRUCTION: &str = "You will be given a list of data points and a question. Use the data points to answer the question. Your answer must be a list of values that is evaluatable in Python. Respond in the format [value1, value2, ..., valueN]. If you are unable to answer the question, respond with []. Respond with only the list of values and nothing else. If a value is a string, it must be enclosed in double quotes.";

pub const AGGREGATION_ANSWER_INSTRUCTION: &str = "You will be given a list of data points and a question. Use the data points to answer the question. If a value is a string, it must be enclosed in double quotes.";

fn sql_type(ty: ValueType) -> &'static str {
    match ty {
        ValueType::Int => "INTEGER",
        ValueType::Float => "REAL",
        ValueType::Text => "TEXT",
        ValueType::Bool => "BOOLEAN",
    }
}

/// `CREATE TABLE` blocks for every table, in name order, separated by a
/// blank line.
pub fn schema_ddl(catalog: &TableCatalog) -> String {
    catalog
        .tables()
        .map(|t| {
            let cols: Vec<String> = t
                .schema()
                .columns()
                .iter()
                .map(|c| format!("    {} {} null", c.name, sql_type(c.ty)))
                .collect();
            format!("CREATE TABLE {}\n(\n{}\n)", t.name(), cols.join(",\n"))
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Schema, comment block and question, ending in `SELECT` for the model to
/// continue.
pub fn synthesis_prompt(catalog: &TableCatalog, question: &str, instruction: &str) -> String {
    format!(
        "{}\n\n-- External Knowledge: None\n-- {instruction}\n-- {}\nSELECT",
        schema_ddl(catalog),
        one_line(question)
    )
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn answer_prompt<S: AsRef<str>>(instruction: &str, items: &[S], question: &str) -> String {
    if items.is_empty() {
        format!("{instruction}\n\nQuestion: {question}")
    } else {
        format!("{instruction}\n\n{}\n\nQuestion: {question}", data_point_blocks(items))
    }
}

/// Prompt asking for a bracketed list of values over serialized rows.
pub fn list_answer_prompt<S: AsRef<str>>(items: &[S], question: &str) -> String {
    answer_prompt(LIST_ANSWER_INSTRUCTION, items, question)
}

/// Prompt asking for a free-text answer over serialized rows.
pub fn aggregation_answer_prompt<S: AsRef<str>>(items: &[S], question: &str) -> String {
    answer_prompt(AGGREGATION_ANSWER_INSTRUCTION, items, question)
}
