"""Error message table so every failure reads the same way."""

# Error messages with the context an operator needs to act on them
ERROR_MESSAGES = {
    # Autodiff
    'shape_mismatch': "{op}: incompatible shapes {shapes}",
    'log_domain': "log: input must be strictly positive (min value {value!r})",
    'backward_non_scalar': "backward: root must be a scalar, got shape {shape}",
    'unknown_op': "op_apply: unknown op kind {kind!r}",
    'gradcheck_eps': "grad_check: eps must be in (0, 1e-3], got {eps!r}",
    'gradcheck_non_finite': (
        "grad_check: non-finite {which} gradient at parameter {param} coordinate {index}"
    ),

    # Model
    'sequence_too_long': (
        "sequence of {length} tokens exceeds model capacity {capacity}"
    ),
    'unknown_token': "symbol {symbol!r} is not in the vocabulary",
    'empty_target': "target must be non-empty",
    'target_not_terminated': "target must end with EOS",
    'bad_decode': "generate: {detail}",
    'missing_group': (
        "{count} adapters attached; scoring needs a group id (AllModules loading)"
    ),

    # Adapters
    'unknown_target': "adapter target {target!r} is not a registered injection point",
    'bad_rank': "adapter rank must be >= 1, got {rank}",
    'empty_targets': "adapter needs at least one target layer",
    'duplicate_attach': "group {group_id} already has an attached adapter",
    'missing_attach': "group {group_id} has no attached adapter",
    'adapter_shape': "adapter target {target!r}: delta shape {delta} does not match weight {weight}",

    # Groups and routing
    'duplicate_language': "language {code!r} appears in groups {first} and {second}",
    'missing_english': "group {group_id} does not include 'en'",
    'empty_group': "group {group_id} has no non-English languages",
    'bad_group_line': "line {line}: {detail}",
    'unknown_language': "unknown language code {code!r}",
    'english_ambiguous': (
        "'en' belongs to every group; route the translation pair with route_pair() instead"
    ),

    # Data
    'empty_batch': "{what}: batch must be non-empty",
    'no_corpora': "sample_monolingual: every corpus is empty",
    'bad_budget': "sample_monolingual: budget must be >= 1, got {budget}",
    'record_parse': "line {line}: {detail}",
    'empty_input': "{what}: input must be non-empty",

    # Training
    'stage_order': (
        "stage {requested} cannot follow {previous}; pass the ordering override for ablations"
    ),
    'frozen_changed': "base weights changed during stage {stage} (checksum {before} -> {after})",
    'frozen_grad': "gradient supplied for frozen tensor {name!r}",
    'grad_set': "optimizer_step: gradients {detail}",
    'grad_shape': "optimizer_step: gradient for {name!r} has shape {got}, expected {expected}",
    'missing_reference': "{method} requires a frozen reference model",

    # Checkpoints
    'checkpoint_magic': "{path}: not a lab checkpoint",
    'checkpoint_version': (
        "{path}: checkpoint format version {found} is not supported (expected {expected})"
    ),
    'checkpoint_truncated': "{path}: checkpoint is truncated or corrupt ({detail})",

    # Evaluation
    'length_mismatch': "{what}: {left} hypotheses vs {right} references",
    'direction_mismatch': "over_rejection_report: directions differ ({detail})",

    # Generic
    'unknown_error': "unexpected failure: {detail}",
}


def get_error_message(error_key: str, **kwargs) -> str:
    """
    Get formatted error message with optional parameters.

    Args:
        error_key: Key from ERROR_MESSAGES dict
        **kwargs: Variables to format in the message

    Returns:
        Formatted error message
    """
    message = ERROR_MESSAGES.get(error_key, ERROR_MESSAGES['unknown_error'])

    try:
        return message.format(**kwargs)
    except KeyError:
        return message
