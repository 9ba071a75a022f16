import pytest

from typestate.frontend import load_program
from typestate.harness import conformance, progress, subject_reduction

from conftest import accepted_corpus


@pytest.mark.parametrize("path", accepted_corpus(), ids=lambda p: p.name)
def test_subject_reduction(path):
    report = subject_reduction(load_program(path), path.name)
    assert report.ok, report.failures
    assert report.steps > 0


@pytest.mark.parametrize("path", accepted_corpus(), ids=lambda p: p.name)
def test_progress(path):
    report = progress(load_program(path), path.name)
    assert report.ok, report.failures


@pytest.mark.parametrize("path", accepted_corpus(), ids=lambda p: p.name)
def test_conformance_and_completion(path):
    report = conformance(load_program(path), path.name)
    assert report.ok, report.failures


def test_harness_flags_an_ill_typed_program(bank_swapped):
    assert not subject_reduction(bank_swapped).ok
    assert not conformance(bank_swapped).ok
