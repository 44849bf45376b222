"""Deterministic generator for the bundled 200-record decision dataset.

Each intent lists utterances written against the rule templates, and a
few paraphrases that a keyword cascade is not expected to catch, with the
action an annotator assigns and the contexts where that action is valid.
About one record in five is drawn from the paraphrases.

Usage: python3 generate.py > dataset.jsonl
"""
import json
import random

EXEC = ("execution", True, 0)
PREVIEW = ("task_preview", True, 3)
RESULTS = ("results", False, 3)
SEARCH = ("search", False, 0)
GREET = ("greeting", False, 0)

PREVIOUS = {
    "execution": [
        "Next, pour in the milk slowly, whisking until the sauce thickens.",
        "Then, roll the walls in overlapping W shapes.",
        "First, preheat the oven to 190C.",
    ],
    "task_preview": [
        "Vegan Lasagna has 6 steps and 9 things you'll need. Say start to begin, or ask what you need.",
        "How to Fix a Squeaky Door has 4 steps and 4 things you'll need. Say start to begin, or ask what you need.",
    ],
    "results": [
        'Here is what I found for "lasagna":\n1. One-Pot Lasagna Soup\n2. Creamy Vegetable Lasagna\n3. Vegan Lasagna\nSay a number to choose one.',
        'Here is what I found for "bread":\n1. Easy Banana Bread\n2. Sourdough Starter From Scratch\n3. Vegan Lasagna\nSay a number to choose one.',
    ],
    "search": ["What would you like to make today?", "Sure. What should we look for?"],
    "greeting": [""],
}

# (gold action, valid contexts, rule-template utterances, paraphrases)
INTENTS = [
    ("next", [EXEC], ["next", "Next", "next."], ["next step", "go on", "what's next", "continue", "i finished that part"]),
    ("previous", [EXEC], ["previous", "Previous!"], ["go back", "back", "go back one step"]),
    ("repeat", [EXEC, PREVIEW], ["repeat", "Repeat."], ["say that again", "come again", "one more time"]),
    ("restart", [EXEC], ["restart"], ["start over", "from the top"]),
    ("step_select(3)", [EXEC], ["go to step 3", "step three", "take me to the third step", "step number 3"], ["skip to the one after next"]),
    ("step_select(2)", [EXEC], ["step 2", "jump to step two", "show me the second step"], []),
    ("select(2)", [RESULTS, PREVIEW], ["select 2", "the second one", "number two", "option 2", "2"], ["the middle one"]),
    ("select(1)", [RESULTS], ["the first one", "1", "number one please", "pick the first"], ["the top one"]),
    ("select(3)", [RESULTS], ["three", "the third", "choose 3", "third one"], []),
    ("show_more_results", [RESULTS], ["more results", "show me more results", "more options", "any more options?"], ["anything else?", "none of these"]),
    ('search(query: "banana bread")', [SEARCH, GREET, RESULTS], ["banana bread"], ["i want to make banana bread", "find banana bread"]),
    ('search(query: "fix a squeaky door")', [SEARCH, GREET], ["fix a squeaky door"], ["help me fix a squeaky door"]),
    ('search(query: "vegan lasagna")', [SEARCH, GREET, RESULTS], ["vegan lasagna"], ["show me vegan lasagna recipes"]),
    ('search(query: "paint a room")', [SEARCH, GREET], ["paint a room"], []),
    ('search(query: "sourdough starter")', [SEARCH, GREET, RESULTS], ["sourdough starter"], []),
    ("ask_question", [EXEC], ["how long should the sauce simmer?", "what temperature should the oven be", "can i use oil instead of butter?", "why do i need to rest it", "which brush works best?", "when do i add the spinach", "is the pan hot enough?", "how do I julienne carrots?"], ["is it fine to skip the spinach", "should i cover the dish"]),
    ("show_requirements", [EXEC, PREVIEW], ["what do i need", "ingredients", "show me the ingredients", "what tools do i need?", "list the requirements", "what will I need?"], ["what goes into it"]),
    ('set_timer(spec: "10 minutes")', [EXEC], ["set a timer for 10 minutes", "timer for 10 minutes", "start a timer for 10 minutes"], ["remind me in 10 minutes"]),
    ("set_timer", [EXEC], ["set a timer", "start a timer", "timer"], []),
    ("start_task", [PREVIEW], ["start", "Start!"], ["let's start", "begin", "i'm ready"]),
    ("stop", [EXEC, RESULTS, SEARCH], ["stop", "Stop."], ["quit", "i'm done"]),
    ("cancel", [RESULTS, PREVIEW, SEARCH], ["cancel"], ["never mind", "forget it"]),
    ("pause", [EXEC], ["pause"], ["hold on", "wait a second"]),
    ("yes", [PREVIEW], ["yes", "Yes."], ["yeah", "sure"]),
    ("no", [PREVIEW], ["no", "No."], ["nope", "not really"]),
    ("chit_chat", [GREET, SEARCH, EXEC], ["hi", "hello", "hey", "thanks", "thank you", "good morning", "how are you"], ["you're funny"]),
    ("inform_capabilities", [GREET, SEARCH, RESULTS], ["what can you do", "help", "what can you help me with?", "how does this work"], ["what are you for"]),
    ("confused_user", [GREET, SEARCH, EXEC], ["i'm confused", "huh", "i don't understand", "i'm lost"], []),
    ("show_more_details", [EXEC, PREVIEW], ["tell me more", "more details", "tell me more about this step", "more details please"], ["explain that", "elaborate"]),
]

TOTAL = 200
PARAPHRASE_RATE = 0.2


def main():
    rng = random.Random(20241014)
    lines = []
    i = 0
    while len(lines) < TOTAL:
        gold, contexts, rules, paraphrases = INTENTS[i % len(INTENTS)]
        pool = paraphrases if paraphrases and rng.random() < PARAPHRASE_RATE else rules
        utterance = rng.choice(pool)
        phase, active, visible = rng.choice(contexts)
        lines.append(
            {
                "utterance": utterance,
                "previous_system_response": rng.choice(PREVIOUS[phase]),
                "scope_phase": phase,
                "has_active_task": active,
                "visible_results": visible,
                "gold_action": gold,
            }
        )
        i += 1
    for line in lines:
        print(json.dumps(line, ensure_ascii=False))


if __name__ == "__main__":
    main()
