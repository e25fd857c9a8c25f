"""Model and explanation metrics: emotion/identity accuracies, ablation
faithfulness of the saliency maps, counterfactual fidelity, and relation
accuracy. All metrics are exact fractions and reproducible given a seed."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import saliency
from .counterfactual import reconstruction_similarity, select_sample, synthesize
from .emotions import CUE_NAMES, EMOTIONS, RELATIONS
from .pipeline import predict_full
from .relations import decode_relation_bits
from .tensornet.gradcam import grad_cam_all_classes


@dataclass
class MetricsReport:
    initial_accuracy: float = float("nan")
    final_accuracy: float = float("nan")
    absolute_ablation_decrease: float = float("nan")
    contrastive_ablation_decrease: float = float("nan")
    random_ablation_decrease: float = float("nan")
    reconstruction_similarity_mean: float = float("nan")
    identity_accuracy: float = float("nan")
    cf_emotion_accuracy: float = float("nan")
    relation_macro_accuracy: float = float("nan")
    details: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True)

    def text_table(self):
        rows = [
            ("Initial concept", "Emotion accuracy (8 classes)", self.initial_accuracy, "%"),
            ("Final concept", "Emotion accuracy (8 classes)", self.final_accuracy, "%"),
            ("Absolute saliency", "Ablated accuracy decrease", self.absolute_ablation_decrease, "%"),
            ("Contrastive saliency", "Ablated accuracy decrease", self.contrastive_ablation_decrease, "%"),
            ("Random ablation control", "Ablated accuracy decrease", self.random_ablation_decrease, "%"),
            ("Counterfactual", "Reconstruction similarity", self.reconstruction_similarity_mean, ""),
            ("Counterfactual", "Identity accuracy", self.identity_accuracy, "%"),
            ("Counterfactual", "Emotion accuracy (contrast)", self.cf_emotion_accuracy, "%"),
            ("Cue difference relation", "Cue accuracy (3 classes, 6 labels)", self.relation_macro_accuracy, "%"),
        ]
        width = max(len(a) + len(b) for a, b, _, _ in rows) + 4
        lines = ["=" * (width + 10)]
        for group, metric, value, unit in rows:
            label = f"{group} | {metric}"
            if value != value:  # NaN
                shown = "   n/a"
            elif unit == "%":
                shown = f"{100 * value:6.1f}%"
            else:
                shown = f"{value:6.3f}"
            lines.append(f"{label:<{width}} {shown}")
        lines.append("=" * (width + 10))
        return "\n".join(lines)


def _ablate(std, sal_map, k_fraction, rng=None):
    """Zero the top-`k_fraction` bins of a standardized spectrogram, ranked
    by the saliency map (or uniformly at random when rng is given)."""
    out = std.copy()
    n = std.size
    k = int(round(k_fraction * n))
    if k <= 0:
        return out
    if rng is None:
        order = np.argsort(-sal_map.ravel(), kind="stable")[:k]
    else:
        order = rng.choice(n, size=k, replace=False)
    out.ravel()[order] = 0.0
    return out


def ablation_report(model, features, ids, labels, k_fraction=0.2, seed=0):
    """Accuracy decrease when the saliency-ranked (absolute / total
    contrastive) or seed-matched random top bins are ablated."""
    hits = {"clean": 0, "absolute": 0, "contrastive": 0, "random": 0}
    rng = np.random.default_rng([seed, 0xAB1A])
    for cid in ids:
        std = features.standardized(cid)
        truth = labels[cid]
        pred, _, _ = model.predict_batch(std[None])
        hits["clean"] += int(pred[0] == truth)
        cams = grad_cam_all_classes(model, std)
        p = int(pred[0])
        absolute = cams[p]
        contrastive = saliency.total_contrastive(
            absolute, [cams[g] for g in range(len(EMOTIONS)) if g != p])
        for arm, sal in (("absolute", absolute), ("contrastive", contrastive)):
            ablated = _ablate(std, sal, k_fraction)
            pa, _, _ = model.predict_batch(ablated[None])
            hits[arm] += int(pa[0] == truth)
        ablated = _ablate(std, None, k_fraction, rng=rng)
        pr, _, _ = model.predict_batch(ablated[None])
        hits["random"] += int(pr[0] == truth)
    n = len(ids)
    clean = hits["clean"] / n
    return {
        "clean_accuracy": clean,
        "absolute_decrease": clean - hits["absolute"] / n,
        "contrastive_decrease": clean - hits["contrastive"] / n,
        "random_decrease": clean - hits["random"] / n,
        "k_fraction": k_fraction,
        "n_clips": n,
    }


def evaluate_counterfactuals(gan, speaker_model, emotion_model, corpus, features,
                             ids, source="synthetic"):
    """Fidelity of counterfactuals over every (clip, contrast) pair: mean
    reconstruction similarity, original-speaker re-identification rate, and
    contrast-emotion recognition rate."""
    actor_index = {a: i for i, a in enumerate(corpus.actors())}
    sims, id_hits, emo_hits, n = [], 0, 0, 0
    for cid in ids:
        meta, _ = corpus.get(cid)
        std = features.standardized(cid)
        for gamma in EMOTIONS:
            if gamma == meta.emotion:
                continue
            if source == "synthetic":
                spec = features.specs[cid]
                converted = synthesize(gan, spec, gamma)
                conv_std = features.stats.transform(np.log1p(converted.power))
                sims.append(reconstruction_similarity(std, conv_std))
            elif source == "samples":
                try:
                    cf = select_sample(corpus, meta, gamma)
                except Exception:
                    continue
                conv_std = features.standardized(cf.clip_id)
                sims.append(1.0)  # real audio of the target speaker, by definition
            else:
                raise ValueError(f"unknown counterfactual source: {source}")
            sp, _, _ = speaker_model.predict_batch(conv_std[None])
            id_hits += int(sp[0] == actor_index[meta.actor])
            ep, _, _ = emotion_model.predict_batch(conv_std[None])
            emo_hits += int(ep[0] == EMOTIONS.index(gamma))
            n += 1
    return {
        "reconstruction_similarity": float(np.mean(sims)) if sims else float("nan"),
        "identity_accuracy": id_hits / n if n else float("nan"),
        "cf_emotion_accuracy": emo_hits / n if n else float("nan"),
        "n_pairs": n,
        "source": source,
    }


def relation_accuracy(predictions, table, labels):
    """Macro accuracy of decoded relations: per-class recall within each cue
    label, averaged over the 6 x 3 cells with support."""
    hits = np.zeros((len(CUE_NAMES), len(RELATIONS)))
    totals = np.zeros_like(hits)
    for rec in predictions:
        truth_label = labels[rec.clip_id]
        for g, probs in rec.relation_probs.items():
            truth = table.relations_for(truth_label, g)
            decoded = decode_relation_bits(probs)
            for k in range(len(CUE_NAMES)):
                r = RELATIONS.index(truth[k])
                totals[k, r] += 1
                hits[k, r] += int(decoded[k] == truth[k])
    with np.errstate(invalid="ignore", divide="ignore"):
        recalls = hits / totals
    macro = float(np.nanmean(recalls))
    return {
        "macro_accuracy": macro,
        "micro_accuracy": float(hits.sum() / totals.sum()) if totals.sum() else float("nan"),
        "per_cue_class_recall": recalls.tolist(),
        "support": totals.tolist(),
    }


def evaluate(corpus, features, model, heads, assets, table, speaker_model=None,
             gan=None, k_fraction=0.2, seed=0, cf_source=None, log_fn=None):
    """Full metrics pass over the test split."""
    from .tensornet.train import class_labels
    labels, _ = class_labels(corpus, "emotion")
    test_ids = [m.clip_id for m, _ in corpus.subset("test")]

    report = MetricsReport()
    preds = predict_full(model, heads, features, assets, test_ids)
    truth = np.array([labels[p.clip_id] for p in preds])
    report.initial_accuracy = float((np.array([p.initial for p in preds]) == truth).mean())
    report.final_accuracy = float((np.array([p.final for p in preds]) == truth).mean())

    if log_fn:
        log_fn("[eval] ablation arms")
    ab = ablation_report(model, features, test_ids, labels, k_fraction, seed)
    report.absolute_ablation_decrease = ab["absolute_decrease"]
    report.contrastive_ablation_decrease = ab["contrastive_decrease"]
    report.random_ablation_decrease = ab["random_decrease"]
    report.details["ablation"] = ab

    rel = relation_accuracy(preds, table, labels)
    report.relation_macro_accuracy = rel["macro_accuracy"]
    report.details["relations"] = rel

    if speaker_model is not None:
        source = cf_source or ("synthetic" if gan is not None else "samples")
        if source == "synthetic" and gan is None:
            source = "samples"
        if log_fn:
            log_fn(f"[eval] counterfactual fidelity ({source})")
        cf = evaluate_counterfactuals(gan, speaker_model, model, corpus,
                                      features, test_ids, source)
        report.reconstruction_similarity_mean = cf["reconstruction_similarity"]
        report.identity_accuracy = cf["identity_accuracy"]
        report.cf_emotion_accuracy = cf["cf_emotion_accuracy"]
        report.details["counterfactual"] = cf
        if gan is not None and source == "synthetic":
            m_cf = evaluate_counterfactuals(gan, speaker_model, gan.domain_classifier,
                                            corpus, features, test_ids, "synthetic")
            report.details["domain_classifier_on_synthetics"] = {
                "cf_emotion_accuracy": m_cf["cf_emotion_accuracy"]}
    return report
