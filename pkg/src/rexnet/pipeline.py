"""End-to-end glue: saliency-masked cue assets, joint fine-tuning of the
base classifier with the relation/concept heads, and the per-clip
explanation record consumed by the bundle writer and the evaluation suite.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import dsp, saliency
from .counterfactual import counterfactual_index, select_sample, synthesize
from .emotions import EMOTIONS
from .relations import (HeadsModel, compute_cue_sd, cue_differences,
                        decode_relation_bits, relation_bits, weighted_cue_diffs)
from .tensornet import tensor as T
from .tensornet.gradcam import grad_cam_all_classes
from .tensornet.layers import SGD
from .tensornet.lrp import lrp_attribute
from .tensornet.train import TrainingDiverged, accuracy, class_labels

log = logging.getLogger(__name__)

N_CLASSES = len(EMOTIONS)


@dataclass
class JointHyper:
    epochs: int = 6
    batch_size: int = 16
    lr: float = 0.003
    momentum: float = 0.9


@dataclass
class JointAssets:
    """Per-clip inputs that stay frozen during joint fine-tuning: contrastive
    saliency masks, the cue vectors measured under them, the per-cue
    standardization SD, and the counterfactual-sample index."""
    cue_map: dict
    cue_sd: np.ndarray
    cf_pairs: dict
    masks: dict


def contrastive_masks(corpus, model, features, tau=saliency.DEFAULT_SALIENCE_THRESHOLD,
                      ids=None):
    """clip_id -> salient-frame mask from the total contrastive map of the
    clip's predicted class."""
    ids = list(ids) if ids is not None else [m.clip_id for m in corpus.metas()]
    masks = {}
    for cid in ids:
        std = features.standardized(cid)
        cams = grad_cam_all_classes(model, std)
        pred, _, _ = model.predict_batch(std[None])
        p = int(pred[0])
        others = [cams[g] for g in range(N_CLASSES) if g != p]
        total = saliency.total_contrastive(cams[p], others)
        masks[cid] = saliency.salient_frame_mask(total, tau)
    return masks


def build_assets(corpus, model, features, tau=saliency.DEFAULT_SALIENCE_THRESHOLD,
                 log_fn=None):
    if log_fn:
        log_fn("[assets] computing contrastive saliency masks and cue vectors")
    masks = contrastive_masks(corpus, model, features, tau)
    cue_map = {}
    for meta, wave in corpus.clips:
        spec = features.specs[meta.clip_id]
        cue_map[meta.clip_id] = dsp.extract_cues(
            spec, wave, salient_mask=masks[meta.clip_id], word_count=meta.word_count)
    train_ids = {m.clip_id for m, _ in corpus.subset("train")}
    cue_sd = compute_cue_sd([cue_map[cid] for cid in sorted(train_ids)] or
                            list(cue_map.values()))
    return JointAssets(cue_map=cue_map, cue_sd=cue_sd,
                       cf_pairs=counterfactual_index(corpus), masks=masks)


def slot_vector(clip_id, pred_idx, assets):
    """48-wide cue-difference layout: one 6-slot block per emotion, ordered
    by class index, with the predicted class's own block zeroed."""
    slots = np.zeros(48, dtype=np.float32)
    cues = assets.cue_map[clip_id]
    for g, emotion in enumerate(EMOTIONS):
        if g == pred_idx:
            continue
        cf_id = assets.cf_pairs.get((clip_id, emotion))
        if cf_id is None or cf_id == clip_id:
            continue
        slots[g * 6:(g + 1) * 6] = cue_differences(
            cues, assets.cue_map[cf_id], assets.cue_sd)
    return slots


def _embed_all(model, features, ids, chunk=32):
    out = {}
    for i in range(0, len(ids), chunk):
        part = ids[i:i + chunk]
        x = np.stack([features.standardized(cid) for cid in part])
        _, _, emb = model.predict_batch(x)
        for cid, e in zip(part, emb):
            out[cid] = e.astype(np.float32)
    return out


def _attributions(heads, my_input, out_index):
    """LRP relevance of the chosen final-concept logit over the 48 slot
    inputs, reshaped per emotion block."""
    rel = lrp_attribute(heads.lrp_layers_y(), my_input, out_index)
    return rel[:48].reshape(8, 6)


def joint_train(corpus, model, heads, features, table, assets, hyper=None,
                seed=0, log_fn=None):
    """Fine-tune the base classifier together with the two heads.

    Loss per batch: cross-entropy of the initial logits, cross-entropy of
    the final-concept logits, and binary cross-entropy of the relation bits
    over the contrast pairs. Cue differences and relevance attributions
    enter as constants; gradients reach the base model through the target
    clip's embedding. Counterfactual embeddings are refreshed once per epoch.
    """
    hyper = hyper or JointHyper()
    labels, _ = class_labels(corpus, "emotion")
    train_ids = [m.clip_id for m, _ in corpus.subset("train")]
    test_ids = [m.clip_id for m, _ in corpus.subset("test")]
    all_ids = [m.clip_id for m in corpus.metas()]
    rng = np.random.default_rng([seed, 0x70E])
    opt = SGD(model.params + heads.params, lr=hyper.lr, momentum=hyper.momentum)

    trace = []
    for epoch in range(hyper.epochs):
        emb_cache = _embed_all(model, features, all_ids)
        order = list(train_ids)
        rng.shuffle(order)
        sums = {"loss0": 0.0, "loss_y": 0.0, "loss_r": 0.0}
        n_batches = 0
        for i in range(0, len(order), hyper.batch_size):
            ids = order[i:i + hyper.batch_size]
            x = np.stack([features.standardized(cid) for cid in ids])[:, None]
            y = np.array([labels[cid] for cid in ids])

            opt.zero_grad()
            logits0, emb, _ = model.forward_batch(T.Tensor(x))
            pred0 = logits0.data.argmax(axis=1)

            slots = np.stack([slot_vector(cid, int(p), assets)
                              for cid, p in zip(ids, pred0)])
            my_in = T.concat([T.Tensor(slots), emb], axis=1)
            logits_y = heads.forward_y(my_in)
            pred_y = logits_y.data.argmax(axis=1)

            pair_rows, pair_sample, pair_embcf, pair_bits = [], [], [], []
            for j, cid in enumerate(ids):
                rel = _attributions(heads, np.concatenate(
                    [slots[j], emb.data[j]]).astype(np.float64), int(pred_y[j]))
                for g, emotion in enumerate(EMOTIONS):
                    if g == int(pred0[j]):
                        continue
                    cf_id = assets.cf_pairs.get((cid, emotion)) or cid
                    pair_rows.append(weighted_cue_diffs(slots[j, g * 6:(g + 1) * 6],
                                                        rel[g]))
                    pair_sample.append(j)
                    pair_embcf.append(emb_cache[cf_id])
                    pair_bits.append(relation_bits(
                        table.relations_for(labels[cid], g)))
            mr_in = T.concat([
                T.Tensor(np.asarray(pair_rows, dtype=np.float32)),
                T.index_rows(emb, pair_sample),
                T.Tensor(np.stack(pair_embcf)),
            ], axis=1)
            logits_r = heads.forward_r(mr_in)

            loss0 = T.softmax_cross_entropy(logits0, y)
            loss_y = T.softmax_cross_entropy(logits_y, y)
            loss_r = T.bce_with_logits(logits_r, np.stack(pair_bits))
            total = loss0 + loss_y + loss_r
            if not np.isfinite(total.data):
                raise TrainingDiverged(f"joint loss non-finite at epoch {epoch}")
            total.backward()
            opt.step()
            sums["loss0"] += float(loss0.data)
            sums["loss_y"] += float(loss_y.data)
            sums["loss_r"] += float(loss_r.data)
            n_batches += 1

        record = {"epoch": epoch}
        record.update({k: v / n_batches for k, v in sums.items()})
        record["initial_train_acc"] = accuracy(model, features, train_ids, labels)
        record["initial_test_acc"] = accuracy(model, features, test_ids, labels)
        trace.append(record)
        if log_fn:
            log_fn(f"[joint] epoch {epoch:3d}  l0 {record['loss0']:.4f}  "
                   f"ly {record['loss_y']:.4f}  lr {record['loss_r']:.4f}  "
                   f"train {record['initial_train_acc']:.3f}")
    return heads, trace


# -- batched inference over the full chain ------------------------------------

@dataclass
class FullPrediction:
    clip_id: str
    initial: int
    final: int
    probs_initial: np.ndarray
    probs_final: np.ndarray
    relation_probs: dict  # gamma index -> (12,) sigmoid outputs
    attributions: dict    # gamma index -> (6,) relevance of the final logit


def predict_full(model, heads, features, assets, ids, chunk=32):
    """Run initial prediction, final-concept head, and relation head for
    every clip; relation probabilities cover every contrast class except the
    clip's initial prediction."""
    needed = set(ids)
    for cid in ids:
        for emotion in EMOTIONS:
            cf_id = assets.cf_pairs.get((cid, emotion))
            if cf_id:
                needed.add(cf_id)
    emb_cache = _embed_all(model, features, sorted(needed), chunk)
    out = []
    for cid in ids:
        std = features.standardized(cid)
        pred, probs, emb = (lambda p, q, e: (int(p[0]), q[0], e[0]))(
            *model.predict_batch(std[None]))
        slots = slot_vector(cid, pred, assets)
        my_in = np.concatenate([slots, emb]).astype(np.float32)
        logits_y = heads.predict_y(my_in[None])[0]
        final = int(logits_y.argmax())
        probs_final = T.softmax(logits_y[None])[0]
        rel = _attributions(heads, my_in.astype(np.float64), final)
        relation_probs, attributions = {}, {}
        rows, gammas = [], []
        for g, emotion in enumerate(EMOTIONS):
            if g == pred:
                continue
            cf_id = assets.cf_pairs.get((cid, emotion)) or cid
            rows.append(np.concatenate([
                weighted_cue_diffs(slots[g * 6:(g + 1) * 6], rel[g]),
                emb, emb_cache[cf_id]]).astype(np.float32))
            gammas.append(g)
        probs_r = heads.predict_r_probs(np.stack(rows))
        for g, p in zip(gammas, probs_r):
            relation_probs[g] = p
            attributions[g] = rel[g]
        out.append(FullPrediction(
            clip_id=cid, initial=pred, final=final,
            probs_initial=probs, probs_final=probs_final,
            relation_probs=relation_probs, attributions=attributions))
    return out


# -- per-clip explanation ------------------------------------------------------

@dataclass
class ContrastEntry:
    gamma: str
    available: bool
    reason: str = ""
    cf_clip_id: str = ""
    cf_cues: object = None
    relations: list = field(default_factory=list)
    relation_probs: np.ndarray = None
    attributions: np.ndarray = None
    bar: np.ndarray = None          # pairwise contrastive saliency bar (T,)
    word_spans: list = field(default_factory=list)
    synthetic_log_mel: np.ndarray = None


@dataclass
class ExplanationRecord:
    clip_id: str
    meta: object
    predicted: str                  # final concept
    initial: str
    probs_final: np.ndarray
    probs_initial: np.ndarray
    target_cues: object
    word_spans: list
    total_bar: np.ndarray
    contrasts: list


def explain_clip(corpus, clip_id, model, heads, features, assets, tau,
                 contrasts=None, gan=None):
    """Assemble the full explanation payload for one clip."""
    meta, wave = corpus.get(clip_id)
    std = features.standardized(clip_id)
    spec = features.specs[clip_id]
    pred_arr, probs0, emb = model.predict_batch(std[None])
    pred0 = int(pred_arr[0])
    emb = emb[0]
    cams = grad_cam_all_classes(model, std)
    total = saliency.total_contrastive(
        cams[pred0], [cams[g] for g in range(N_CLASSES) if g != pred0])
    spans = dsp.segment_words(wave, meta.word_count)
    total_bar = saliency.to_time_bar(total, spans)
    target_cues = assets.cue_map[clip_id]

    slots = slot_vector(clip_id, pred0, assets)
    my_in = np.concatenate([slots, emb]).astype(np.float32)
    logits_y = heads.predict_y(my_in[None])[0]
    final = int(logits_y.argmax())
    probs_final = T.softmax(logits_y[None])[0]
    rel = _attributions(heads, my_in.astype(np.float64), final)

    wanted = contrasts if contrasts is not None else \
        [e for e in EMOTIONS if e != EMOTIONS[final]]
    entries = []
    for gamma in wanted:
        g = EMOTIONS.index(gamma)
        if g == final:
            raise ValueError(f"contrast equals the predicted emotion: {gamma}")
        entry = ContrastEntry(gamma=gamma, available=True)
        try:
            cf_meta = select_sample(corpus, meta, gamma, allow_same_emotion=True)
        except Exception as exc:
            entries.append(ContrastEntry(gamma=gamma, available=False, reason=str(exc)))
            continue
        entry.cf_clip_id = cf_meta.clip_id
        entry.cf_cues = assets.cue_map[cf_meta.clip_id]
        wdiff = weighted_cue_diffs(slots[g * 6:(g + 1) * 6], rel[g])
        cf_emb = _embed_all(model, features, [cf_meta.clip_id])[cf_meta.clip_id]
        row = np.concatenate([wdiff, emb, cf_emb]).astype(np.float32)
        probs_r = heads.predict_r_probs(row[None])[0]
        entry.relation_probs = probs_r
        entry.relations = decode_relation_bits(probs_r)
        entry.attributions = rel[g]
        pairwise = saliency.pairwise_contrastive(cams[pred0], cams[g])
        bar = saliency.to_time_bar(pairwise, spans)
        entry.bar = bar.per_frame
        entry.word_spans = bar.word_spans
        if gan is not None:
            entry.synthetic_log_mel = np.log1p(
                synthesize(gan, spec, gamma).power).astype(np.float32)
        entries.append(entry)

    return ExplanationRecord(
        clip_id=clip_id, meta=meta,
        predicted=EMOTIONS[final], initial=EMOTIONS[pred0],
        probs_final=probs_final, probs_initial=probs0[0],
        target_cues=target_cues, word_spans=total_bar.word_spans,
        total_bar=total_bar.per_frame, contrasts=entries)
