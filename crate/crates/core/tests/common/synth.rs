//! Generated Java for timing runs.

/// Ten-line blocks needed for a method of at least `lines` lines.
pub fn blocks_for(lines: usize) -> usize {
    lines.saturating_sub(4).div_ceil(10)
}

/// A class holding one method `compute` of at least `lines` lines, made of
/// ten-line blocks starting at line 6.
pub fn long_method(lines: usize) -> String {
    let mut out = String::from("import java.util.List;\n\nclass Long {\n    int compute(int x, int limit, List<String> log) {\n        int total = 0;\n");
    for i in 0..blocks_for(lines) {
        out.push_str(&format!(
            "        int a{i} = x + {i};\n        if (a{i} > limit) {{\n            total += a{i};\n        }} else {{\n            total -= {i};\n        }}\n        for (int j{i} = 0; j{i} < a{i} % 7; j{i}++) {{\n            total += j{i} * a{i};\n        }}\n        log.add(\"step {i}: \" + total);\n"
        ));
    }
    out.push_str("        return total;\n    }\n}\n");
    out
}

/// Five completions proposing block-aligned ranges in a [`long_method`] body.
pub fn completions(blocks: usize) -> Vec<String> {
    (0..5)
        .map(|k| {
            let picks: Vec<String> = (0..6)
                .map(|p| {
                    let b = (k * 7 + p * 11) % blocks.max(1);
                    let start = 6 + 10 * b;
                    format!(r#"{{"function_name": "step{b}", "line_start": {start}, "line_end": {}}}"#, start + 9 - (p % 3))
                })
                .collect();
            format!("[{}]", picks.join(", "))
        })
        .collect()
}
