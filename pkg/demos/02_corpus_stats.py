"""Corpus tooling: manifests, chunking, label statistics, tier splits.

The bundled toy corpus declares four chronological tiers plus an excluded
source and a modern dev split; this script walks the whole ingestion path.
"""

from nikudkit import data
from nikudkit.corpus import build_chunks, label_distribution, load_manifest, tier_partition
from nikudkit.hebrew import LABELS

entries = load_manifest(data.path("toy/manifest.tsv"))
for e in entries:
    flag = "included" if e.include else "EXCLUDED"
    print(f"{e.era}  {e.split:5s}  {flag:8s}  {e.name}")

train = build_chunks([e for e in entries if e.split == "train"], max_len=64)
print(f"\n{len(train)} training chunks, "
      f"{sum(c.char_count for c in train)} Hebrew letters")

tiers = tier_partition(train)
for i, tier in enumerate(tiers, start=1):
    print(f"  tier{i}: {len(tier)} chunks")

s_dist, d_dist, n_dist = label_distribution(train)
print("\nvowel-point distribution (N category):")
for lab, count in sorted(n_dist.items(), key=lambda kv: -kv[1]):
    print(f"  {LABELS.n_names[lab]:12s} {count}")
print("dagesh:", {LABELS.d_names[k]: v for k, v in sorted(d_dist.items())})
print("shin/sin:", {LABELS.s_names[k]: v for k, v in sorted(s_dist.items())})
