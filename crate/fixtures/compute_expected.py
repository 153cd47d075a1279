"""Independent computation of the fixture corpus statistics.

Writes corpus.expected.json next to this script. Run with python3; uses only
the standard library.
"""
import json
import math
import string
from pathlib import Path

HERE = Path(__file__).parent
PUNCT = set(string.punctuation) | set("‘’“”–—…«»")
ELEMENTS = ["character", "setting", "feeling", "action", "causal_relationship",
            "outcome_resolution", "prediction"]


def tokens(text):
    out = []
    for raw in text.split():
        start, end = 0, len(raw)
        while start < end and raw[start] in PUNCT:
            start += 1
        while end > start and raw[end - 1] in PUNCT:
            end -= 1
        if start < end:
            out.append(raw[start:end].lower())
    return out


def summary(values):
    n = len(values)
    mean = sum(values) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
    return {"mean": mean, "sd": sd, "min": min(values), "max": max(values)}


def main():
    manifest = json.loads((HERE / "corpus" / "manifest.json").read_text())
    result = {}
    for split, ids in manifest["splits"].items():
        cols = {k: [] for k in ["sections_per_story", "tokens_per_story", "tokens_per_section",
                                "questions_per_story", "questions_per_section",
                                "tokens_per_question", "tokens_per_answer"]}
        categories = {e: 0 for e in ELEMENTS}
        for sid in ids:
            story = json.loads((HERE / "corpus" / "stories" / f"{sid}.json").read_text())
            sections = story["sections"]
            cols["sections_per_story"].append(len(sections))
            sec_tokens = [len(tokens(s["text"])) for s in sections]
            cols["tokens_per_story"].append(sum(sec_tokens))
            cols["tokens_per_section"].extend(sec_tokens)
            pairs = story["qa_pairs"]
            cols["questions_per_story"].append(len(pairs))
            per_section = {s["index"]: 0 for s in sections}
            for p in pairs:
                for i in p["section_indices"]:
                    per_section[i] += 1
                cols["tokens_per_question"].append(len(tokens(p["question"])))
                cols["tokens_per_answer"].append(len(tokens(p["answer"])))
                categories[p["element"]] += 1
            cols["questions_per_section"].extend(per_section[k] for k in sorted(per_section))
        qa = sum(cols["questions_per_story"])
        result[split] = {
            "book_count": len(ids),
            "qa_count": qa,
            "qg_training_pairs": qa,
            "ranking_positives": qa,
            "stats": {k: summary(v) for k, v in cols.items()},
            "categories": categories,
        }
    (HERE / "corpus.expected.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
