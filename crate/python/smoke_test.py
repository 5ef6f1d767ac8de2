"""Smoke test for the jet_py extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`.
"""

import math
import os
import random
import tempfile

import jet_py


def synthetic_docs(n_docs, seed=0):
    rng = random.Random(seed)
    docs = []
    for _ in range(n_docs):
        topic = rng.choice("ab")
        words = []
        while len(words) < 20:
            if rng.random() < 0.12:
                i = rng.randrange(5)
                words.append(f"u{topic}{i}" if rng.random() < 0.7 else f"amb{i} disease")
            elif rng.random() < 0.65:
                words.append(f"{topic}w{rng.randrange(30)}")
            else:
                words.append(f"f{rng.randrange(10)}")
        docs.append(" ".join(words))
    return docs


def main():
    assert jet_py.normalize("Common-Cold (acute)") == ["common", "cold", "acute"]
    assert abs(jet_py.cosine([1.0, 0.0], [1.0, 1.0]) - 1 / math.sqrt(2)) < 1e-12
    assert abs(jet_py.spearman([1, 2, 3], [1, 3, 2]) - 0.5) < 1e-12
    assert abs(jet_py.wsd_score([0.3, -1.2], [0.3, -1.2]) - 1.0) < 1e-12

    pairs = []
    for topic in "ab":
        for i in range(5):
            pairs.append((f"u{topic}{i}", f"{topic.upper()}{i}"))
            pairs.append((f"amb{i} disease", f"{topic.upper()}{i}"))
    terms = jet_py.Terminology(pairs)
    assert terms.n_terms == 15 and terms.n_entities == 10
    assert terms.polysemy("AMB3 disease") == 2
    assert terms.entities("amb0 disease") == ["A0", "B0"]
    assert terms.scan("the amb1 disease ua2") == [(1, 3, "amb1 disease"), (3, 4, "ua2")]

    docs = synthetic_docs(3000)
    emb = jet_py.train(docs, terms, dim=20, epochs=5, min_count=5, subsample=1e-3, seed=1)
    assert emb.dim == 20
    assert emb.count("entity") == 10
    assert "ent:A0" in emb and "ent:ZZ" not in emb

    neighbors = emb.nearest("ent:A0", topk=3, kinds=["entity"])
    assert all(key != "ent:A0" for key, _ in neighbors)
    assert neighbors[0][0].startswith("ent:A"), neighbors

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "m.bin")
        emb.save(path)
        again = jet_py.EmbeddingSet.load(path)
        assert again.vector("ent:B1") == emb.vector("ent:B1")
        bad = os.path.join(tmp, "bad.bin")
        with open(path, "rb") as f:
            data = bytearray(f.read())
        data[0:4] = b"NOPE"
        with open(bad, "wb") as f:
            f.write(data)
        try:
            jet_py.EmbeddingSet.load(bad)
        except (ValueError, OSError) as e:
            assert "magic" in str(e)
        else:
            raise AssertionError("corrupt file accepted")

    try:
        emb.vector("ent:missing")
    except KeyError:
        pass
    else:
        raise AssertionError("missing key accepted")

    print("smoke test passed:", repr(emb))


if __name__ == "__main__":
    main()
