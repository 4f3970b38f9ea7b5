import numpy as np
from hypothesis import given, strategies as st

from numen.models.enums import HashVariant
from numen.schemas.encoder import EncoderConfig, Ngram
from numen.services.encoder import encode, extract_ngrams, hash_ngram
from numen.utils.text_processing import normalize_and_tokenize

CONFIG = EncoderConfig(dimension=2048)

ascii_words = st.lists(
    st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=12),
    min_size=1,
    max_size=8,
)


@given(st.text(max_size=200))
def test_any_text_encodes_to_unit_or_zero(text: str) -> None:
    v = encode(text, CONFIG)
    assert v.dtype == np.float32
    assert v.shape == (2048,)
    assert np.isfinite(v).all()
    assert (v >= 0).all()
    norm = float(np.linalg.norm(v.astype(np.float64)))
    assert norm == 0.0 or abs(norm - 1.0) < 1e-5


@given(st.text(max_size=100))
def test_encoding_is_deterministic(text: str) -> None:
    assert np.array_equal(encode(text, CONFIG), encode(text, CONFIG))


@given(ascii_words)
def test_upper_case_input_encodes_identically(words) -> None:
    text = " ".join(words)
    assert np.array_equal(encode(text, CONFIG), encode(text.upper(), CONFIG))


@given(ascii_words, st.sampled_from([" ", ", ", " - ", "\t", "... "]))
def test_separator_choice_does_not_matter(words, separator: str) -> None:
    assert np.array_equal(encode(" ".join(words), CONFIG), encode(separator.join(words), CONFIG))


@given(ascii_words, st.randoms(use_true_random=False))
def test_word_order_does_not_matter(words, random) -> None:
    shuffled = list(words)
    random.shuffle(shuffled)
    a = encode(" ".join(words), CONFIG)
    b = encode(" ".join(shuffled), CONFIG)
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_seeded_bulk_texts_and_configs() -> None:
    rng = np.random.default_rng(2024)
    alphabet = np.array(list("abcdefghijklmnopqrstuvwxyz ,.!?0123456789ÄéßЖ数"))
    configs = [
        EncoderConfig(
            dimension=int(rng.integers(1, 40_000)),
            hash_variant=list(HashVariant)[i % 2],
        )
        for i in range(50)
    ] + [EncoderConfig.from_parts(777, (3, 4), (1.0, 2.0)), EncoderConfig(dimension=32768)]
    for i in range(10_000):
        config = configs[i % len(configs)]
        text = "".join(rng.choice(alphabet, size=int(rng.integers(0, 60))))
        v = encode(text, config)
        assert np.array_equal(v, encode(text, config))
        norm = float(np.linalg.norm(v.astype(np.float64)))
        assert norm == 0.0 or abs(norm - 1.0) < 1e-5
        assert (v >= 0).all()
        words = normalize_and_tokenize(text)
        if words:
            assert norm > 0.0
            assert all(
                0 <= hash_ngram(g, config) < config.dimension
                for g in extract_ngrams(words[0], config)
            )
            reversed_text = " ".join(reversed(words))
            np.testing.assert_allclose(encode(reversed_text, config), v, atol=1e-6)


@given(
    st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=2, max_size=10),
    st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=4),
)
def test_words_sharing_a_prefix_overlap(word: str, suffix: str) -> None:
    # both start with the trigram "^" + word[:2]
    a = encode(word, CONFIG)
    b = encode(word + suffix, CONFIG)
    assert float(np.dot(a.astype(np.float64), b.astype(np.float64))) > 0.0


@given(st.binary(min_size=1, max_size=16), st.integers(min_value=1, max_value=1 << 20))
def test_hash_range(data: bytes, dimension: int) -> None:
    config = EncoderConfig(dimension=dimension)
    text = data.decode("latin-1")
    assert 0 <= hash_ngram(Ngram(text, 3), config) < dimension
