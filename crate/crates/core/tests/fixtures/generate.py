"""Writes the synthetic NDJSON streams used by the integration tests.

    python3 generate.py

Output is fully determined by the fixed seed.
"""
import json
import random

TOPICS = {
    "quake": "earthquake magnitude tremor coast tsunami warning shaking epicenter aftershock",
    "match": "goal striker penalty keeper final derby league referee stadium",
    "launch": "rocket launch orbit booster payload satellite countdown pad",
    "market": "stocks shares index rally earnings investors nasdaq selloff",
    "storm": "hurricane landfall winds rainfall evacuation flooding forecast surge",
    "film": "premiere trailer director actress festival screening box office",
}
FILLER = "just now really wow today news update breaking live people".split()


def message(rng, i, ts):
    topic = rng.choice(sorted(TOPICS))
    words = TOPICS[topic].split()
    body = rng.sample(words, rng.randint(3, 5)) + rng.sample(FILLER, rng.randint(0, 2))
    rng.shuffle(body)
    text = " ".join(body)
    if rng.random() < 0.15:
        text = "RT @user%d %s" % (rng.randint(1, 50), text)
    if rng.random() < 0.1:
        text += " https://t.example/%d" % i
    return {"id": "m%04d" % i, "ts": ts, "text": text, "author": "user%d" % rng.randint(1, 80)}


def write(path, count, step_ms, seed):
    rng = random.Random(seed)
    ts = 1_700_000_000_000
    with open(path, "w") as f:
        for i in range(count):
            ts += rng.randint(step_ms // 2, step_ms * 3 // 2)
            f.write(json.dumps(message(rng, i, ts), sort_keys=True) + "\n")


if __name__ == "__main__":
    write("stream-200.ndjson", 200, 200, 7)
    write("stream-700.ndjson", 700, 100, 11)
