use std::io::Write;
use std::process::{Command, Stdio};

use super::{Annotation, AnnotationBackend};

/// Runs an external annotator once per text: the text goes to stdin and an
/// [`Annotation`] JSON document is expected on stdout. This is how a full
/// NLP toolkit (tagger, NER, semantic role labeller) plugs in.
#[derive(Debug, Clone)]
pub struct ProcessAnnotator {
    id: String,
    program: String,
    args: Vec<String>,
}

impl ProcessAnnotator {
    pub fn new(id: impl Into<String>, program: impl Into<String>, args: Vec<String>) -> Self {
        Self { id: id.into(), program: program.into(), args }
    }
}

impl AnnotationBackend for ProcessAnnotator {
    fn id(&self) -> &str {
        &self.id
    }

    fn annotate_text(&self, text: &str) -> Result<Annotation, String> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start `{}`: {e}", self.program))?;
        {
            let mut stdin = child.stdin.take().ok_or("stdin unavailable")?;
            // A child that ignores its input may close the pipe early.
            let _ = stdin.write_all(text.as_bytes());
        }
        let output = child.wait_with_output().map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!(
                "`{}` exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        serde_json::from_slice(&output.stdout).map_err(|e| format!("unreadable annotation JSON: {e}"))
    }
}
