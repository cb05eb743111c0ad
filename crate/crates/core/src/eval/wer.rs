use crate::error::{Error, Result};

/// Word-level edit distance (substitutions + deletions + insertions).
pub fn word_errors<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r.as_ref() != h.as_ref());
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// Word error rate in percent. Not clipped: insertions can push it past 100.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(100.0 * word_errors(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Pooled WER: total errors over total reference words.
pub fn corpus_wer<S: AsRef<str>, T: AsRef<str>>(pairs: &[(Vec<S>, Vec<T>)]) -> Result<f64> {
    let words: usize = pairs.iter().map(|(r, _)| r.len()).sum();
    if words == 0 {
        return Err(Error::EmptyReference);
    }
    let errors: usize = pairs.iter().map(|(r, h)| word_errors(r, h)).sum();
    Ok(100.0 * errors as f64 / words as f64)
}
