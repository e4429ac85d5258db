"""Regenerates eval_records.csv: 536 labeled questions with fixed counts.

Row order and ids are shuffled with a fixed seed, so the output is stable.
"""
import csv
import random

rows = []


def add(n, **kw):
    for _ in range(n):
        r = dict(valid=1, category="", ai_correct=0, community_correct=0,
                 accepted_by="none", ai_answer_upvoted=0, community_answer_upvoted=0)
        r.update(kw)
        rows.append(r)


# 46 invalid questions
add(46, valid=0)
# curricular: 249 valid, 243 AI-correct, 4 of 6 misses recovered
add(243, category="curricular", ai_correct=1)
add(4, category="curricular", community_correct=1)
add(2, category="curricular")
# administrative: 241 valid, 133 AI-correct, 40 of 108 misses recovered
add(133, category="administrative", ai_correct=1)
add(40, category="administrative", community_correct=1)
add(68, category="administrative")

ai_ok = [r for r in rows if r["ai_correct"]]
recovered = [r for r in rows if r["valid"] and not r["ai_correct"] and r["community_correct"]]

rng = random.Random(20240917)
# some AI-correct questions also got a correct community answer
for r in rng.sample(ai_ok, 30):
    r["community_correct"] = 1

# 20 AI answers accepted, 4 community answers accepted
for r in rng.sample(ai_ok, 20):
    r["accepted_by"] = "ai"
for r in rng.sample(recovered, 4):
    r["accepted_by"] = "community"

# 36 upvoted questions: 21 AI only, 11 community only, 4 both
pool = [r for r in ai_ok if r["accepted_by"] == "none"]
picked = rng.sample(pool, 25)
for r in picked:
    r["ai_answer_upvoted"] = 1
for r in picked[:4]:
    r["community_answer_upvoted"] = 1
    r["community_correct"] = 1
for r in rng.sample([r for r in recovered if r["accepted_by"] == "none"], 11):
    r["community_answer_upvoted"] = 1

rng.shuffle(rows)
fields = ["question_id", "valid", "category", "ai_correct", "community_correct",
          "accepted_by", "ai_answer_upvoted", "community_answer_upvoted"]
with open("eval_records.csv", "w", newline="") as f:
    w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for i, r in enumerate(rows, 1):
        w.writerow({"question_id": f"q{i:03d}", **r})
