"""Session fixtures for the exporter tests."""

from __future__ import annotations

import pytest


@pytest.fixture(scope="session")
def tiny_bert(tmp_path_factory) -> str:
    """A locally built, saved and reloaded miniature BERT checkpoint."""
    torch = pytest.importorskip("torch")
    pytest.importorskip("transformers")
    from transformers import BertConfig, BertModel, BertTokenizer

    model_dir = tmp_path_factory.mktemp("tiny-bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
             "acetaminophen", "aspirin", "acenol", "apap", "paracetamol",
             "pain", "relief", "drug", "inhibitor", ",",
             "c", "n", "o", "(", ")", "=", "1", "2"]
    (model_dir / "vocab.txt").write_text("\n".join(vocab) + "\n",
                                         encoding="utf-8")
    tokenizer = BertTokenizer(str(model_dir / "vocab.txt"))
    config = BertConfig(vocab_size=len(vocab), hidden_size=16,
                        num_hidden_layers=1, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=64)
    torch.manual_seed(0)
    model = BertModel(config)
    model.save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return str(model_dir)
