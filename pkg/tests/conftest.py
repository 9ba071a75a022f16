import sys
from pathlib import Path

import pytest

from typestate.frontend import load_program

HERE = Path(__file__).parent
CORPUS = HERE.parent / "corpus"

sys.path.insert(0, str(HERE))


def corpus_files():
    return sorted(CORPUS.glob("*.pap"))


def accepted_corpus():
    """Corpus programs whose expectation is acceptance or a run."""
    out = []
    for p in corpus_files():
        exp = p.with_suffix(".expect").read_text().strip()
        if exp == "accept" or exp.startswith("run:"):
            out.append(p)
    return out


@pytest.fixture(scope="session")
def bank():
    return load_program(CORPUS / "bankaccount.pap")


@pytest.fixture(scope="session")
def bank_swapped():
    return load_program(CORPUS / "bankaccount_swapped.pap")
