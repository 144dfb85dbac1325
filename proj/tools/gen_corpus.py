#!/usr/bin/env python3
# Copyright 2026 The klamp Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the bundled synthetic corpus in data/corpus/.

Output is a pure function of SEED. Run from the repo root:
    python3 tools/gen_corpus.py
"""

import json
import pathlib
import random

SEED = 20240611
OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "corpus"
BASE_TS = 1_700_000_000
DAY = 86_400

TOPICS = {
    "apple": {
        "entities": ["Apple Inc.", "Tim Cook", "Macbook", "macOS", "iPhone",
                     "Steve Jobs", "Vision Pro"],
        "aliases": {"apple": "Apple Inc.", "mac os": "macOS",
                    "macbook pro": "Macbook", "iphones": "iPhone"},
        "queries": ["tim cook", "apple earnings", "macbook pro review",
                    "iphone release date", "macos update", "vision pro price",
                    "steve jobs biography"],
    },
    "space": {
        "entities": ["NASA", "SpaceX", "Mars", "Artemis program",
                     "James Webb Space Telescope", "Moon", "Elon Musk"],
        "aliases": {"jwst": "James Webb Space Telescope", "artemis": "Artemis program",
                    "webb telescope": "James Webb Space Telescope"},
        "queries": ["nasa artemis launch", "spacex starship", "mars rover news",
                    "webb telescope images", "moon landing 2025",
                    "elon musk spacex"],
    },
    "football": {
        "entities": ["Premier League", "Arsenal F.C.", "Manchester City",
                     "Erling Haaland", "Champions League", "Liverpool F.C."],
        "aliases": {"arsenal": "Arsenal F.C.", "man city": "Manchester City",
                    "haaland": "Erling Haaland", "liverpool": "Liverpool F.C."},
        "queries": ["premier league table", "arsenal transfer news",
                    "haaland goals", "champions league draw",
                    "liverpool fixtures", "man city vs arsenal"],
    },
    "climate": {
        "entities": ["Climate change", "Paris Agreement", "Solar power",
                     "Electric vehicle", "Carbon tax", "Heat wave"],
        "aliases": {"global warming": "Climate change", "solar": "Solar power",
                    "ev": "Electric vehicle", "evs": "Electric vehicle"},
        "queries": ["paris agreement targets", "solar power cost",
                    "electric vehicle tax credit", "heat wave europe",
                    "carbon tax explained", "climate change report"],
    },
    "cooking": {
        "entities": ["Sourdough", "Pasta", "Olive oil", "Italian cuisine",
                     "Air fryer", "Gordon Ramsay"],
        "aliases": {"sourdough bread": "Sourdough", "ramsay": "Gordon Ramsay",
                    "air fryers": "Air fryer"},
        "queries": ["sourdough starter", "pasta carbonara recipe",
                    "air fryer chicken", "gordon ramsay recipes",
                    "best olive oil", "italian cuisine history"],
    },
}

ALLOWED = ["news.example.com", "www.dailytech.example", "sportsdesk.example",
           "science.example.org", "kitchen.example.net"]
OFF_LIST = ["spam.example.biz", "clickbait.example.info"]

TOPIC_DOMAIN = {"apple": "www.dailytech.example", "space": "science.example.org",
                "football": "sportsdesk.example", "climate": "news.example.com",
                "cooking": "kitchen.example.net"}

FILLER = ("The report covers recent developments and reactions from readers. "
          "Analysts expect further announcements in the coming weeks.")

# Topic preference weights per user.
USERS = {
    "alice": {"apple": 6, "space": 3, "cooking": 1},
    "bob": {"football": 6, "climate": 2, "apple": 2},
    "carol": {"space": 5, "climate": 4, "apple": 1},
    "dave": {"cooking": 5, "football": 3, "climate": 2},
    "erin": {"apple": 3, "space": 3, "football": 2, "cooking": 2},
}


def make_pages(rng):
    pages = []
    for topic, info in TOPICS.items():
        ents = info["entities"]
        for i in range(8):
            a, b = rng.sample(ents, 2)
            c = rng.choice(ents)
            slug = f"{topic}-{i}"
            title = f"{a} and {b}: what to know"
            text = (f"{a} was in the headlines this week. Coverage of {b} "
                    f"continued, and several readers asked about {c}. {FILLER}")
            pages.append({"topic": topic, "url": f"https://{TOPIC_DOMAIN[topic]}/{slug}",
                          "title": title, "text": text})
    return pages


def main():
    rng = random.Random(SEED)
    pages = make_pages(rng)
    by_topic = {}
    for p in pages:
        by_topic.setdefault(p["topic"], []).append(p)

    events = []
    for user, prefs in USERS.items():
        topics = list(prefs)
        weights = [prefs[t] for t in topics]
        ts = BASE_TS + rng.randrange(0, DAY)
        for s in range(16):
            topic = rng.choices(topics, weights)[0]
            n = rng.randint(2, 5)
            no_click = rng.random() < 0.1
            for r in range(n):
                query = rng.choice(TOPICS[topic]["queries"])
                if rng.random() < 0.05:
                    query = f"{query} {user} private note"  # unique; k-anonymity drops it
                ev = {"user": user, "ts": ts, "query": query}
                if not no_click and rng.random() < 0.8:
                    if rng.random() < 0.05:
                        dom = rng.choice(OFF_LIST)
                        ev["click"] = {"url": f"https://{dom}/{rng.randrange(1000)}",
                                       "title": "You will not believe this",
                                       "text": "Sponsored content."}
                    else:
                        p = rng.choice(by_topic[topic])
                        ev["click"] = {"url": p["url"], "title": p["title"],
                                       "text": p["text"]}
                events.append(ev)
                ts += rng.randint(30, 900)
            ts += rng.randint(DAY // 2, 5 * DAY)

    events.sort(key=lambda e: (e["ts"], e["user"]))
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "events.jsonl", "w", encoding="utf-8") as f:
        for ev in events:
            f.write(json.dumps(ev, ensure_ascii=False, sort_keys=True) + "\n")
        f.write("this line is not json\n")
    with open(OUT / "gazetteer.tsv", "w", encoding="utf-8") as f:
        f.write("# alias<TAB>canonical id\n")
        for info in TOPICS.values():
            for e in info["entities"]:
                f.write(f"{e}\t{e}\n")
            for alias, e in info["aliases"].items():
                f.write(f"{alias}\t{e}\n")
    with open(OUT / "allowlist.txt", "w", encoding="utf-8") as f:
        for d in ALLOWED:
            f.write(d + "\n")
    with open(OUT / "pages.jsonl", "w", encoding="utf-8") as f:
        for p in pages:
            f.write(json.dumps({"url": p["url"], "title": p["title"],
                                "text": p["text"]}, ensure_ascii=False) + "\n")
    with open(OUT / "search_corpus.jsonl", "w", encoding="utf-8") as f:
        for p in pages:
            f.write(json.dumps({"title": p["title"], "snippet": p["text"][:160]},
                               ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
