"""Writes canonical_queries.txt: one `dialect<TAB>query` line per query.

Built from string templates alone so the corpus does not depend on the
serializer it is used to test. Run from this directory:

    python3 make_canonical_queries.py > canonical_queries.txt
"""

import itertools
import random

FB_PROPS = [
    "film.actor.film",
    "film.performance.character",
    "people.person.gender",
    "people.person.spouse_s",
    "fictional_universe.marriage_of_fictional_characters.spouses",
    "film.film.directed_by",
    "film.director.film",
    "people.person.nationality",
]
FB_CLASSES = ["film.actor", "film.director", "people.person", "film.film"]
MIDS = ["ns:m.05zppz", "ns:m.02zsn", "ns:m.0h4y854", "ns:m.09c7w0"]
WD_PROPS = ["wdt:P453", "wdt:P21", "wdt:P26", "wdt:P57", "wdt:P58", "wdt:P106", "wdt:P27"]
WD_ENTITIES = ["wd:Q6581097", "wd:Q6581072", "wd:Q50807639", "wd:Q1560129", "wd:Q2526255"]
VARS = ["?x0", "?x1", "?x2"]
PLACEHOLDERS = ["M0", "M1", "M2", "M3"]


def fb_path(rng, length):
    steps = []
    for _ in range(length):
        step = "ns:" + rng.choice(FB_PROPS)
        if rng.random() < 0.3:
            step = "^" + step
        steps.append(step)
    return "/".join(steps)


def node(rng, constants):
    roll = rng.random()
    if roll < 0.45:
        return rng.choice(VARS)
    if roll < 0.75:
        return rng.choice(PLACEHOLDERS)
    return rng.choice(constants)


def filters(rng, nodes, count):
    out = []
    pairs = [(a, b) for a, b in itertools.permutations(nodes, 2) if a.startswith("?") or b.startswith("?")]
    rng.shuffle(pairs)
    for a, b in pairs[:count]:
        out.append("FILTER ( %s != %s )" % (a, b))
    return out


def body(elements):
    return "{ " + " . ".join(elements) + " }"


def head(form, projection):
    if form == "ask":
        return "ASK WHERE "
    if form == "count":
        return "SELECT count(*) WHERE "
    distinct = " DISTINCT" if form == "distinct" else ""
    return "SELECT%s %s WHERE " % (distinct, " ".join(projection))


def modifiers(rng, form, projection):
    if form not in ("select", "distinct"):
        return ""
    roll = rng.random()
    if roll < 0.3:
        return " ORDER BY %s LIMIT %d" % (" ".join(projection), rng.randint(1, 50))
    if roll < 0.45:
        return " ORDER BY " + " ".join(projection)
    if roll < 0.6:
        return " LIMIT %d" % rng.randint(1, 50)
    return ""


def query(rng, dialect, form, path_len, n_filters):
    triples = []
    for i in range(rng.randint(1, 3)):
        s = "?x0" if i == 0 else node(rng, MIDS if dialect == "freebase" else WD_ENTITIES)
        if dialect == "freebase":
            o = node(rng, MIDS)
            length = path_len if i == 0 else rng.randint(1, 3)
            triples.append("%s %s %s" % (s, fb_path(rng, length), o))
        else:
            o = node(rng, WD_ENTITIES)
            triples.append("%s %s %s" % (s, rng.choice(WD_PROPS), o))
    if dialect == "freebase" and rng.random() < 0.35:
        triples.append("%s a ns:%s" % (rng.choice(VARS[:2]), rng.choice(FB_CLASSES)))
    terms = []
    for t in triples:
        parts = t.split(" ")
        for p in (parts[0], parts[-1]):
            if not p.startswith(("ns:", "wd:")) and p not in terms:
                terms.append(p)
    variables = [t for t in terms if t.startswith("?")]
    fs = filters(rng, terms, n_filters)
    projection = variables[: rng.randint(1, len(variables))]
    return head(form, projection) + body(triples + fs) + modifiers(rng, form, projection)


def main():
    rng = random.Random(20240917)
    seen = set()
    lines = []
    plans = []
    for form in ("count", "select", "distinct"):
        for path_len in (1, 2, 3):
            for n_filters in range(4):
                plans.append(("freebase", form, path_len, n_filters))
    for form in ("ask", "select", "distinct"):
        for n_filters in range(4):
            plans.append(("wikidata", form, 1, n_filters))
    while len(lines) < 240:
        for plan in plans:
            q = query(rng, *plan)
            if q not in seen:
                seen.add(q)
                lines.append("%s\t%s" % (plan[0], q))
    for line in lines:
        print(line)


if __name__ == "__main__":
    main()
