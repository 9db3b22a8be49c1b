"""Regenerates ttest_cases.json (scipy.stats.ttest_rel) and the Alpaca golden files.

Run from this directory: python3 gen_oracles.py
"""
import json
import random

import scipy
from scipy import stats


def ttests():
    rng = random.Random(11)
    cases = [{
        "a": [30.1, 28.4, 35.0, 40.2, 22.9, 31.7],
        "b": [29.0, 28.9, 33.1, 39.0, 22.0, 30.2],
    }]
    for _ in range(24):
        n = rng.choice([2, 3, 4, 5, 6, 10, 18, 21, 30])
        a = [round(rng.uniform(10, 60), 2) for _ in range(n)]
        shift = rng.uniform(-2, 2)
        b = [round(x + shift + rng.gauss(0, 1.5), 2) for x in a]
        cases.append({"a": a, "b": b})
    for c in cases:
        r = stats.ttest_rel(c["a"], c["b"])
        c["t"] = float(r.statistic)
        c["p"] = float(r.pvalue)
    with open("ttest_cases.json", "w") as f:
        json.dump({"reference": "scipy " + scipy.__version__ + " ttest_rel", "cases": cases}, f, indent=1)


LAW_HINT = ("The sentence is from legal texts and legislation of the European Union. "
            "The style of text is formal, precise and heavily structured. "
            "Translate into a legal domain style.")
FT = "Translate the following German text into English."


def goldens():
    three = [
        {"instruction": FT,
         "input": "Der Vertrag tritt am 1. Januar in Kraft.",
         "output": "The treaty enters into force on 1 January."},
        {"instruction": FT,
         "input": "Sie sagte: \"Größe\" \\ Maß\tTab",
         "output": "She said: \"size\" \\ measure\ttab – ok ✓"},
        {"instruction": FT,
         "input": "Zeile 1\nZeile 2 \u0001 模型 😀",
         "output": "Line 1\nLine 2 \u0001 model 😀"},
    ]
    with open("alpaca_three.json", "w", encoding="utf-8") as f:
        f.write(json.dumps(three, indent=2, ensure_ascii=False))
    hinted = [{
        "instruction": FT + "\n\n### Hint:\n" + LAW_HINT,
        "input": "Der Vertrag tritt am 1. Januar in Kraft.",
        "output": "The treaty enters into force on 1 January.",
    }]
    with open("alpaca_hint_ft_g.json", "w", encoding="utf-8") as f:
        f.write(json.dumps(hinted, indent=2, ensure_ascii=False))


if __name__ == "__main__":
    ttests()
    goldens()
