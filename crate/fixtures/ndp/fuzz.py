"""Deterministic 500-utterance fuzz corpus for decision scope checks.

Mixes action keywords, number and step references, timer and question
phrasings, noise tokens, odd punctuation and non-ASCII text.

Usage: python3 fuzz.py > fuzz_utterances.txt
"""
import random

KEYWORDS = ["next", "previous", "repeat", "stop", "pause", "cancel", "restart", "yes", "no", "start"]
NUMBERS = ["1", "2", "3", "4", "7", "12", "0", "one", "two", "three", "first", "second", "third", "tenth", "99999999999"]
FRAMES = [
    "{k}", "{K}", "{k}!", "{k}?", "  {k}  ", "{k} please", "please {k}", "ok {k}", "{k} {k}",
    "select {n}", "the {n} one", "number {n}", "option {n}", "step {n}", "go to step {n}", "the {n} step",
    "set a timer for {n} minutes", "timer for {n} hours", "start a timer", "timer",
    "what do i need", "ingredients", "show me the tools", "what is {w}?", "how do i {w} the {w}",
    "why {w}", "can i {w}", "which {w}", "when do i {w}", "{w} {w}?", "{w} {w} {w}",
    "more results", "more options", "more details", "tell me more", "help", "huh", "hi", "thanks",
    "i'm confused", "what can you do", "search(query: \"{w}\")", "select({n})", "step_select({n})",
    "unknown(raw: \"{w}\")", "{w}({w})", "\"{w}\"", "\\{w}\\", "{w}\t{w}", "🍝 {w}", "crème brûlée",
    "ПРИВЕТ", "日本語のレシピ", "{w}-{w}", "{w}'s {w}", "...", "???", "; DROP TABLE", "{n}{n}{n}",
]
WORDS = ["lasagna", "butter", "door", "hinge", "paint", "oven", "sauce", "next", "stop", "timer", "step",
         "recipe", "bread", "starter", "the", "a", "julienne", "carrots", "more", "details", "start", "über"]


def fill(frame, rng):
    out = frame
    while "{k}" in out:
        out = out.replace("{k}", rng.choice(KEYWORDS), 1)
    while "{K}" in out:
        out = out.replace("{K}", rng.choice(KEYWORDS).upper(), 1)
    while "{n}" in out:
        out = out.replace("{n}", rng.choice(NUMBERS), 1)
    while "{w}" in out:
        out = out.replace("{w}", rng.choice(WORDS), 1)
    return out


def main():
    rng = random.Random(500)
    seen = []
    while len(seen) < 500:
        text = fill(rng.choice(FRAMES), rng)
        if text.strip() and "\n" not in text:
            seen.append(text)
    for text in seen:
        print(text)


if __name__ == "__main__":
    main()
