"""Transfer harness: does diacritization training help POS tagging?

Trains the same linear tagging head (shared seed) over two encoders: one
briefly fine-tuned for dotting on the toy corpus and one freshly
initialized.  The per-epoch delta table isolates the encoder difference.
"""

from nikudkit import data
from nikudkit.corpus import build_chunks, load_manifest, tier_partition
from nikudkit.model import Model, ModelConfig, alphabet_from_chunks
from nikudkit.pos import compare, load_conllu, pos_train
from nikudkit.training import TrainConfig, train_curriculum

train_sents = load_conllu(data.path("ud_sample/train.conllu"))
dev_sents = load_conllu(data.path("ud_sample/dev.conllu"))
print(f"{len(train_sents)} train / {len(dev_sents)} dev sentences")

entries = load_manifest(data.path("toy/manifest.tsv"))
chunks = build_chunks([e for e in entries if e.split == "train"], max_len=64)
alphabet = alphabet_from_chunks(chunks)
alphabet = "".join(sorted(set(alphabet) |
                          {ch for s in train_sents + dev_sents for ch in s.text}))
config = ModelConfig(alphabet=alphabet, d_model=32, n_layers=2, n_heads=4,
                     neck_hidden=64, max_len=64)

print("fine-tuning an encoder for dotting (short run)...")
dotted = Model.init(config, seed=0)
dotted, _ = train_curriculum(
    dotted, tier_partition(chunks), chunks,
    TrainConfig(peak_lr=2e-3, batch_size=8, epochs_per_tier=8, seed=0))

fresh = Model.init(config, seed=0)

HEAD_SEED = 5
log_dotted = pos_train(dotted, train_sents, dev_sents, epochs=5, seed=HEAD_SEED)
log_fresh = pos_train(fresh, train_sents, dev_sents, epochs=5, seed=HEAD_SEED)

print(compare(log_dotted, log_fresh).render())
