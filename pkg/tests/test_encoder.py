import math

import numpy as np
import pytest
from pydantic import ValidationError

from numen.models.enums import HashVariant
from numen.schemas.encoder import EncoderConfig, Ngram
from numen.services.encoder import (
    DimensionMismatchError,
    NgramWeightError,
    NumenEncoder,
    cosine_score,
    encode,
    encode_batch,
    encode_features,
    encode_stats,
    extract_ngrams,
    featurize,
    hash_ngram,
    ngram_weight,
)


def _reference_vector(text, config, crc_oracle):
    """Straight-line rendition of the encoding pipeline on top of the bitwise CRC."""
    v = np.zeros(config.dimension, dtype=np.float64)
    for word in text.lower().split():
        padded = f"^{word}$"
        for n in config.ngram_sizes:
            for j in range(len(padded) - n + 1):
                gram = padded[j : j + n]
                crc = crc_oracle(gram.encode("utf-8"), config.hash_variant.value)
                v[crc % config.dimension] += config.weight_table[n]
    v = np.log1p(v)
    norm = np.linalg.norm(v)
    return v / norm if norm else v


def test_extract_ngrams_for_likes(default_config: EncoderConfig) -> None:
    grams = [g.text for g in extract_ngrams("likes", default_config)]
    assert grams == [
        "^li", "lik", "ike", "kes", "es$",
        "^lik", "like", "ikes", "kes$",
        "^like", "likes", "ikes$",
    ]


def test_extract_ngrams_single_letter(default_config: EncoderConfig) -> None:
    assert extract_ngrams("a", default_config) == [Ngram("^a$", 3)]


def test_extract_ngrams_keeps_duplicates(default_config: EncoderConfig) -> None:
    grams = [g.text for g in extract_ngrams("aaaa", default_config)]
    assert len(grams) == 9
    assert grams.count("aaa") == 2


def test_extract_ngrams_rejects_empty_word(default_config: EncoderConfig) -> None:
    with pytest.raises(ValueError):
        extract_ngrams("", default_config)


def test_weights_follow_length(default_config: EncoderConfig) -> None:
    assert ngram_weight(Ngram("^li", 3), default_config) == 1.0
    assert ngram_weight(Ngram("like", 4), default_config) == 5.0
    assert ngram_weight(Ngram("likes", 5), default_config) == 10.0


def test_weight_below_smallest_key_is_an_error(default_config: EncoderConfig) -> None:
    with pytest.raises(NgramWeightError):
        ngram_weight(Ngram("^a", 2), default_config)


def test_weight_lookup_uses_largest_key_not_above_length() -> None:
    config = EncoderConfig(ngram_sizes=(3, 4, 5), weight_table={3: 1.0, 5: 10.0})
    assert ngram_weight(Ngram("like", 4), config) == 1.0
    assert ngram_weight(Ngram("likes", 5), config) == 10.0


def test_config_rejects_sizes_without_weight() -> None:
    with pytest.raises(ValidationError):
        EncoderConfig(ngram_sizes=(2, 3, 4, 5))


def test_config_rejects_bad_values() -> None:
    with pytest.raises(ValidationError):
        EncoderConfig(dimension=0)
    with pytest.raises(ValidationError):
        EncoderConfig(weight_table={3: -1.0, 4: 5.0, 5: 10.0})
    with pytest.raises(ValidationError):
        EncoderConfig(weight_table={3: 0.0, 4: 0.0, 5: 0.0})


def test_from_parts_requires_aligned_lists() -> None:
    with pytest.raises(ValueError):
        EncoderConfig.from_parts(1024, (3, 4, 5), (1.0, 5.0))
    config = EncoderConfig.from_parts(1024, (5, 3, 4), (10.0, 1.0, 5.0), "crc32c")
    assert config.ngram_sizes == (3, 4, 5)
    assert config.weight_table == {3: 1.0, 4: 5.0, 5: 10.0}
    assert config.hash_variant is HashVariant.CRC32_C


def test_with_dimension_keeps_everything_else(default_config: EncoderConfig) -> None:
    smaller = default_config.with_dimension(512)
    assert smaller.dimension == 512
    assert smaller.ngram_sizes == default_config.ngram_sizes
    assert smaller.weight_table == default_config.weight_table
    assert smaller.key() != default_config.key()


def test_hash_ngram_matches_bitwise_crc(default_config: EncoderConfig, crc_oracle) -> None:
    for gram in extract_ngrams("zebra", default_config):
        assert hash_ngram(gram, default_config) == crc_oracle(gram.bytes) % 32768


def test_single_letter_word_is_one_hot(default_config: EncoderConfig, crc_oracle) -> None:
    v = encode("a", default_config)
    assert v.dtype == np.float32
    assert v.shape == (32768,)
    assert np.count_nonzero(v) == 1
    assert v[crc_oracle(b"^a$") % 32768] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "text",
    ["likes", "aaaa", "zzzz qqqq", "Who likes apples and pears", "a b c"],
)
@pytest.mark.parametrize("variant", list(HashVariant))
def test_encode_matches_reference(text: str, variant: HashVariant, crc_oracle) -> None:
    config = EncoderConfig(dimension=4096, hash_variant=variant)
    expected = _reference_vector(text, config, crc_oracle)
    np.testing.assert_allclose(encode(text, config), expected, rtol=0, atol=1e-6)


def test_repeated_ngrams_accumulate(default_config: EncoderConfig, crc_oracle) -> None:
    v = encode("aaaa", default_config)
    raw = np.zeros(32768)
    for gram in extract_ngrams("aaaa", default_config):
        raw[crc_oracle(gram.bytes) % 32768] += default_config.weight_table[len(gram.text)]
    expected = np.log1p(raw)
    expected /= np.linalg.norm(expected)
    np.testing.assert_allclose(v, expected, atol=1e-6)
    index = crc_oracle(b"aaa") % 32768
    assert raw[index] >= 2.0


@pytest.mark.parametrize("text", ["", "   ", "?!,.-_"])
def test_text_without_words_encodes_to_zero(text: str, default_config: EncoderConfig) -> None:
    v = encode(text, default_config)
    assert v.shape == (32768,)
    assert not v.any()


def test_encoding_is_unit_length(default_config: EncoderConfig) -> None:
    v = encode("Sophia likes quantum chromodynamics and sourdough", default_config)
    assert float(np.linalg.norm(v.astype(np.float64))) == pytest.approx(1.0, abs=1e-5)
    assert (v >= 0).all()


def test_case_and_punctuation_do_not_matter(default_config: EncoderConfig) -> None:
    a = encode("Who likes Apples, Pears?", default_config)
    b = encode("who likes apples pears", default_config)
    assert np.array_equal(a, b)


def test_hash_variant_changes_the_vector() -> None:
    ieee = encode("likes", EncoderConfig(dimension=4096))
    castagnoli = encode("likes", EncoderConfig(dimension=4096, hash_variant=HashVariant.CRC32_C))
    assert not np.array_equal(ieee, castagnoli)


def test_shared_morphology_scores_higher(default_config: EncoderConfig) -> None:
    like = encode("like", default_config)
    likes = encode("likes", default_config)
    zebra = encode("zebra", default_config)
    assert cosine_score(like, likes) > 0.4
    assert cosine_score(like, likes) > cosine_score(like, zebra)


def test_like_likes_cosine_by_hand(default_config: EncoderConfig, crc_oracle) -> None:
    grams = {g.text for w in ("like", "likes") for g in extract_ngrams(w, default_config)}
    indices = {crc_oracle(g.encode()) % 32768 for g in grams}
    if len(indices) < len(grams):
        pytest.skip("hash collision among like/likes n-grams")
    t, f, v = math.log(2), math.log(6), math.log(11)
    # shared: ^li lik ike | ^lik like | ^like
    dot = 3 * t * t + 2 * f * f + v * v
    norm_like = math.sqrt(4 * t * t + 3 * f * f + 2 * v * v)
    norm_likes = math.sqrt(5 * t * t + 4 * f * f + 3 * v * v)
    expected = dot / (norm_like * norm_likes)
    assert expected == pytest.approx(0.4974, abs=2e-4)
    score = cosine_score(encode("like", default_config), encode("likes", default_config))
    assert score == pytest.approx(expected, abs=1e-5)


def test_disjoint_words_score_zero(default_config: EncoderConfig, crc_oracle) -> None:
    zzzz = {crc_oracle(g.bytes) % 32768 for g in extract_ngrams("zzzz", default_config)}
    qqqq = {crc_oracle(g.bytes) % 32768 for g in extract_ngrams("qqqq", default_config)}
    score = cosine_score(encode("zzzz", default_config), encode("qqqq", default_config))
    if zzzz & qqqq:
        assert score > 0.0
    else:
        assert score == 0.0


def test_zero_operand_scores_zero(default_config: EncoderConfig) -> None:
    zero = np.zeros(32768, dtype=np.float32)
    assert cosine_score(encode("abc", default_config), zero) == 0.0


def test_extract_ngrams_for_aaa(default_config: EncoderConfig) -> None:
    grams = [(g.text, g.length_class) for g in extract_ngrams("aaa", default_config)]
    assert grams == [
        ("^aa", 3), ("aaa", 3), ("aa$", 3), ("^aaa", 4), ("aaa$", 4), ("^aaa$", 5),
    ]


def test_codepoint_windows(default_config: EncoderConfig) -> None:
    grams = [g.text for g in extract_ngrams("café", default_config) if g.length_class == 3]
    assert grams == ["^ca", "caf", "afé", "fé$"]
    assert Ngram("afé", 3).bytes == "afé".encode("utf-8")


def test_dimension_one_hashes_to_zero() -> None:
    config = EncoderConfig(dimension=1)
    assert {hash_ngram(g, config) for g in extract_ngrams("likes", config)} == {0}


def test_long_ngrams_use_largest_weight() -> None:
    config = EncoderConfig(ngram_sizes=(3, 4, 5, 7))
    assert ngram_weight(Ngram("^likes$", 7), config) == 10.0


def test_repetition_saturates(default_config: EncoderConfig) -> None:
    peaks = []
    for k in (1, 2, 4, 8):
        features = featurize(" ".join(["likes"] * k), default_config)
        assert features.count == 12 * k
        raw = np.bincount(
            (features.crcs % np.uint64(32768)).astype(np.intp),
            weights=features.weights,
            minlength=32768,
        )
        peaks.append(float(np.log1p(raw).max()))
    assert peaks == sorted(peaks) and len(set(peaks)) == 4
    assert peaks[-1] < 8 * peaks[0]
    assert peaks[0] >= math.log1p(10.0)


def test_cosine_of_identical_texts(default_config: EncoderConfig) -> None:
    v = encode("identical text", default_config)
    assert cosine_score(v, v) == pytest.approx(1.0, abs=1e-6)


def test_cosine_rejects_dimension_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        cosine_score(np.zeros(8, dtype=np.float32), np.zeros(16, dtype=np.float32))


def test_features_are_dimension_independent(default_config: EncoderConfig) -> None:
    text = "Mara likes violins, kites"
    features = featurize(text, default_config)
    assert features.count == encode_stats(text, default_config).ngram_count
    for dimension in (8, 512, 32768):
        np.testing.assert_array_equal(
            encode_features(features, dimension),
            encode(text, default_config.with_dimension(dimension)),
        )


def test_encode_stats(default_config: EncoderConfig, crc_oracle) -> None:
    stats = encode_stats("likes", default_config)
    assert stats.ngram_count == 12
    assert stats.distinct_ngrams == 12
    grams = extract_ngrams("likes", default_config)
    assert stats.nonzero_components == len({crc_oracle(g.bytes) % 32768 for g in grams})

    repeated = encode_stats("aaaa", default_config)
    assert repeated.ngram_count == 9
    assert repeated.distinct_ngrams == 8


def test_encode_stats_counts_collisions_at_tiny_dimension() -> None:
    config = EncoderConfig(dimension=1)
    stats = encode_stats("likes", config)
    assert stats.nonzero_components == 1
    assert stats.collided_ngrams == 12


def test_batch_encoding_keeps_input_order(small_config: EncoderConfig) -> None:
    texts = [f"person{i} likes item{i % 3} and thing{i % 5}" for i in range(12)]
    sequential = np.stack([encode(t, small_config) for t in texts])
    np.testing.assert_array_equal(encode_batch(texts, small_config), sequential)
    np.testing.assert_array_equal(encode_batch(texts, small_config, n_jobs=2), sequential)


def test_encoder_wrapper(small_config: EncoderConfig) -> None:
    encoder = NumenEncoder(small_config)
    assert encoder.dimension == 4096
    assert encoder.embed_texts([]).shape == (0, 4096)
    matrix = encoder.embed_texts(["one", "two"])
    assert matrix.shape == (2, 4096)
    np.testing.assert_array_equal(matrix[1], encoder.encode("two"))
    assert encoder.stats("one").ngram_count == 6
