"""Corpus metrics on small hand-checkable fixtures."""

from iurkit import bleu, evaluate, rouge_l, rouge_n
from iurkit.datamodel import Utterance


def u(text):
    return Utterance.from_texts(text.split())


# every hypothesis n-gram appears in the reference, so corpus BLEU is
# just the brevity penalty: 100 * exp(1 - 5/4) = 77.88
print("BLEU  :", round(bleu([u("a b c d")], [u("a b c d e")]), 3))

# one shared unigram out of two on each side: F1 = 0.5
print("ROUGE1:", rouge_n([u("a b")], [u("a c")], 1))
print("ROUGEL:", rouge_l([u("a b c d")], [u("a c d b")]))

result = evaluate([u("the answer"), u("forty two")],
                  [u("the answer"), u("forty one")])
print(result.table())
