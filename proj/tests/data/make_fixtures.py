#!/usr/bin/env python3
"""Regenerates the test corpus: corpus200.tsv, citations200.tsv, icite/*.json.

Five topics of 40 articles, each split into two subtopics, so the map has a
two-level structure. Output is deterministic.
"""
import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
rng = random.Random(7)

TOPICS = [
    {
        "name": "oncology",
        "journals": ["J Clin Oncol", "Lancet Oncol"],
        "mesh": ["Neoplasms", "Immunotherapy"],
        "words": ["tumor", "cancer", "oncology", "metastatic", "chemotherapy", "survival"],
        "sub": [
            {"words": ["checkpoint", "pembrolizumab", "melanoma", "pd-1"], "mesh": ["Melanoma", "Immune Checkpoint Inhibitors"],
             "intervention": "pembrolizumab every three weeks", "outcome": "overall survival at two years",
             "condition": "advanced melanoma"},
            {"words": ["breast", "her2", "trastuzumab", "adjuvant"], "mesh": ["Breast Neoplasms", "Trastuzumab"],
             "intervention": "adjuvant trastuzumab for one year", "outcome": "invasive disease-free survival",
             "condition": "HER2-positive breast cancer"},
        ],
    },
    {
        "name": "cardiology",
        "journals": ["Circulation", "Eur Heart J"],
        "mesh": ["Cardiovascular Diseases"],
        "words": ["cardiac", "heart", "blood", "pressure", "vascular", "cardiovascular"],
        "sub": [
            {"words": ["hypertension", "antihypertensive", "systolic", "amlodipine"], "mesh": ["Hypertension", "Antihypertensive Agents"],
             "intervention": "amlodipine 5 mg daily", "outcome": "change in systolic blood pressure at 12 weeks",
             "condition": "resistant hypertension"},
            {"words": ["atrial", "fibrillation", "anticoagulation", "stroke"], "mesh": ["Atrial Fibrillation", "Anticoagulants"],
             "intervention": "apixaban twice daily", "outcome": "stroke or systemic embolism",
             "condition": "nonvalvular atrial fibrillation"},
        ],
    },
    {
        "name": "neurology",
        "journals": ["Neurology", "Lancet Neurol"],
        "mesh": ["Nervous System Diseases"],
        "words": ["cognitive", "brain", "neuronal", "dementia", "neurodegeneration", "memory"],
        "sub": [
            {"words": ["alzheimer", "amyloid", "tau", "plaques"], "mesh": ["Alzheimer Disease", "Amyloid beta-Peptides"],
             "intervention": "monthly lecanemab infusions", "outcome": "change in clinical dementia rating at 18 months",
             "condition": "early Alzheimer disease"},
            {"words": ["parkinson", "dopamine", "levodopa", "tremor"], "mesh": ["Parkinson Disease", "Levodopa"],
             "intervention": "extended-release levodopa", "outcome": "daily off time",
             "condition": "Parkinson disease with motor fluctuations"},
        ],
    },
    {
        "name": "infection",
        "journals": ["N Engl J Med", "Clin Infect Dis"],
        "mesh": ["Communicable Diseases"],
        "words": ["infection", "viral", "vaccine", "antibody", "immunization", "pathogen"],
        "sub": [
            {"words": ["influenza", "hemagglutinin", "seasonal", "adjuvanted"], "mesh": ["Influenza, Human", "Influenza Vaccines"],
             "intervention": "a high-dose influenza vaccine", "outcome": "laboratory-confirmed influenza",
             "condition": "older adults"},
            {"words": ["tuberculosis", "mycobacterium", "rifampicin", "latent"], "mesh": ["Tuberculosis", "Rifampin"],
             "intervention": "four months of rifampicin", "outcome": "treatment completion",
             "condition": "latent tuberculosis infection"},
        ],
    },
    {
        "name": "metabolism",
        "journals": ["Diabetes Care", "Lancet Diabetes Endocrinol"],
        "mesh": ["Metabolic Diseases"],
        "words": ["glucose", "insulin", "metabolic", "glycemic", "diabetes", "obesity"],
        "sub": [
            {"words": ["semaglutide", "glp-1", "weight", "appetite"], "mesh": ["Obesity", "Glucagon-Like Peptide-1 Receptor"],
             "intervention": "weekly semaglutide", "outcome": "percentage change in body weight",
             "condition": "obesity without diabetes"},
            {"words": ["metformin", "hba1c", "sulfonylurea", "hypoglycemia"], "mesh": ["Diabetes Mellitus, Type 2", "Metformin"],
             "intervention": "metformin with a sulfonylurea", "outcome": "change in HbA1c at 24 weeks",
             "condition": "type 2 diabetes"},
        ],
    },
]

GENERIC = ["study", "patients", "results", "analysis", "clinical", "trial", "effect", "associated", "risk", "treatment"]
DESIGNS = ["randomized controlled trial", "cohort study", "case-control study", "cross-sectional study", "systematic review"]
POPULATIONS = ["patients", "participants", "adults"]


def sentence(words, n):
    picked = [rng.choice(words) for _ in range(n)]
    return " ".join(picked).capitalize() + "."


def abstract_for(topic, sub, kind):
    design = rng.choice(DESIGNS)
    n = rng.randrange(40, 2000)
    pop = rng.choice(POPULATIONS)
    vocab = topic["words"] + sub["words"] * 2 + GENERIC
    parts = [f"We conducted a {design} of {n} {pop} with {sub['condition']}."]
    if kind != "no_intervention":
        parts.append(f"Participants were randomized to receive {sub['intervention']} or placebo.")
    if kind != "no_outcome":
        parts.append(f"The primary outcome was {sub['outcome']}.")
    for _ in range(3):
        parts.append(sentence(vocab, rng.randrange(6, 11)))
    return " ".join(parts)


def title_for(topic, sub):
    words = [rng.choice(sub["words"]), rng.choice(topic["words"]), rng.choice(sub["words"]), rng.choice(GENERIC)]
    return " ".join(words).capitalize() + f" in {sub['condition']}"


def main():
    rows = []
    members = {}
    pmid = 31000000
    for t_index, topic in enumerate(TOPICS):
        for s_index, sub in enumerate(topic["sub"]):
            for k in range(20):
                pmid += rng.randrange(3, 50)
                kind = "full"
                if k == 5:
                    kind = "no_outcome"
                if k == 9:
                    kind = "no_intervention"
                year = rng.randrange(2003, 2024)
                date = str(year) if k % 3 else f"{year}-{rng.randrange(1, 13):02d}-{rng.randrange(1, 29):02d}"
                abstract = abstract_for(topic, sub, kind)
                mesh = topic["mesh"] + sub["mesh"]
                if k == 17:
                    mesh = []
                rows.append({
                    "pmid": str(pmid),
                    "date": date,
                    "journal": rng.choice(topic["journals"]),
                    "title": title_for(topic, sub),
                    "abstract": abstract,
                    "mesh_terms": ";".join(mesh),
                    "citation_count": "0" if k < 4 else str(int(rng.paretovariate(1.2) * 3)),
                    "size": "0" if k < 4 else f"{rng.uniform(0.1, 4.0):.2f}",
                    "source": "fixture",
                })
                members.setdefault((t_index, s_index), []).append(str(pmid))

    cols = ["pmid", "date", "journal", "title", "abstract", "mesh_terms", "citation_count", "size", "source"]
    with open(os.path.join(HERE, "corpus200.tsv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(cols) + "\n")
        for r in rows:
            f.write("\t".join(r[c] for c in cols) + "\n")

    # External citing papers mostly cite within one subtopic, sometimes
    # across subtopics of a topic, occasionally across topics.
    links = []
    citing = 90000000
    keys = sorted(members)
    for _ in range(320):
        citing += 1
        t, s = rng.choice(keys)
        roll = rng.random()
        pool = list(members[(t, s)])
        if roll < 0.2:
            pool += members[(t, 1 - s)]
        elif roll < 0.25:
            other = rng.choice(keys)
            pool += members[other]
        cited = rng.sample(pool, rng.randrange(2, 5))
        for c in sorted(cited):
            links.append((str(citing), c))
    with open(os.path.join(HERE, "citations200.tsv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("citing\tcited\n")
        for a, b in links:
            f.write(f"{a}\t{b}\n")

    # Citation metrics for the first four articles of each subtopic, which
    # carry zero counts in the corpus, plus one record that disagrees with
    # a nonzero corpus value.
    icite = os.path.join(HERE, "icite")
    os.makedirs(icite, exist_ok=True)
    for name in os.listdir(icite):
        os.remove(os.path.join(icite, name))
    for key in keys:
        for p in members[key][:4]:
            rec = {"pmid": int(p), "citation_count": rng.randrange(1, 400),
                   "relative_citation_ratio": round(rng.uniform(0.2, 6.0), 2), "year": 2015}
            with open(os.path.join(icite, p + ".json"), "w", encoding="utf-8") as f:
                json.dump(rec, f, sort_keys=True)
                f.write("\n")
    p = members[keys[0]][6]
    with open(os.path.join(icite, p + ".json"), "w", encoding="utf-8") as f:
        json.dump({"pmid": int(p), "citation_count": 99999, "relative_citation_ratio": None}, f, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
