use std::path::{Path, PathBuf};

use mdcr::{
    load_label_file, load_matrix, zscore, ColumnStats64, FeatureMatrix64, LabelMap, LabelVector, MatrixFormat,
    Model64, PairedDataset64,
};

use crate::failure::Failure;
use crate::InputArgs;

/// Features and raw labels read from disk, checked for consistent row counts.
pub struct LoadedSet {
    pub images: FeatureMatrix64,
    pub texts: FeatureMatrix64,
    pub raw_labels: Vec<i64>,
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix64, Failure> {
    let format = MatrixFormat::detect(path).map_err(|e| Failure::validation(path.display(), e))?;
    load_matrix(path, format).map_err(|e| Failure::validation(path.display(), e))
}

pub fn load_set(args: &InputArgs) -> Result<LoadedSet, Failure> {
    let raw_labels = load_label_file(&args.labels).map_err(|e| Failure::validation(args.labels.display(), e))?;
    let images = load_features(&args.images)?;
    let texts = load_features(&args.texts)?;
    for (path, rows) in [(&args.images, images.rows()), (&args.texts, texts.rows())] {
        if rows != raw_labels.len() {
            return Err(Failure::Validation(format!(
                "{}: {rows} rows but {} has {} labels",
                path.display(),
                args.labels.display(),
                raw_labels.len()
            )));
        }
    }
    Ok(LoadedSet {
        images,
        texts,
        raw_labels,
    })
}

/// A training set ready for the optimizer, with the transforms fitted on it.
pub struct PreparedTraining {
    pub data: PairedDataset64,
    pub label_map: LabelMap,
    pub image_stats: Option<ColumnStats64>,
    pub text_stats: Option<ColumnStats64>,
}

pub fn prepare_training(set: LoadedSet, normalize: bool) -> Result<PreparedTraining, Failure> {
    let label_map = LabelMap::fit(&set.raw_labels)?;
    let labels = label_map.apply(&set.raw_labels)?;
    let (images, texts, image_stats, text_stats) = if normalize {
        let (images, is) = zscore(&set.images, None)?;
        let (texts, ts) = zscore(&set.texts, None)?;
        (images, texts, Some(is), Some(ts))
    } else {
        (set.images, set.texts, None, None)
    };
    Ok(PreparedTraining {
        data: PairedDataset64::new(images, texts, labels)?,
        label_map,
        image_stats,
        text_stats,
    })
}

/// Applies a model's stored label map and normalization to an evaluation set.
pub fn prepare_for_model(set: &LoadedSet, model: &Model64) -> Result<PairedDataset64, Failure> {
    let classes = model.pair.classes();
    if set.images.cols() != model.pair.image_dim() || set.texts.cols() != model.pair.text_dim() {
        return Err(Failure::Validation(format!(
            "model expects {}-d images and {}-d texts, got {}-d and {}-d",
            model.pair.image_dim(),
            model.pair.text_dim(),
            set.images.cols(),
            set.texts.cols()
        )));
    }
    let labels = match &model.label_values {
        Some(values) => LabelMap::fit(values)?.apply(&set.raw_labels)?,
        None => {
            let ids = set
                .raw_labels
                .iter()
                .map(|&l| usize::try_from(l).map_err(|_| Failure::Validation(format!("label {l} is negative"))))
                .collect::<Result<Vec<_>, _>>()?;
            LabelVector::new(ids, classes)?
        }
    };
    let images = match &model.image_stats {
        Some(s) => s.apply(&set.images)?,
        None => set.images.clone(),
    };
    let texts = match &model.text_stats {
        Some(s) => s.apply(&set.texts)?,
        None => set.texts.clone(),
    };
    Ok(PairedDataset64::new(images, texts, labels)?)
}

pub fn load_model(path: &Path) -> Result<Model64, Failure> {
    Model64::load(path).map_err(|e| Failure::validation(path.display(), e))
}

/// Train and test file sets of a dataset directory.
pub struct DatasetFiles {
    pub root: PathBuf,
    pub train: InputArgs,
    pub test: InputArgs,
}

fn find_stem(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["bin", "txt"]
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// Expected names, in `dir` or `dir/wikipedia`:
/// `{train,test}_images.{bin,txt}`, `{train,test}_texts.{bin,txt}`, `{train,test}_labels.txt`.
pub fn find_dataset(dir: &Path) -> Option<DatasetFiles> {
    [dir.join("wikipedia"), dir.to_path_buf()].into_iter().find_map(|root| {
        let side = |prefix: &str| -> Option<InputArgs> {
            Some(InputArgs {
                images: find_stem(&root, &format!("{prefix}_images"))?,
                texts: find_stem(&root, &format!("{prefix}_texts"))?,
                labels: find_stem(&root, &format!("{prefix}_labels"))?,
            })
        };
        Some(DatasetFiles {
            train: side("train")?,
            test: side("test")?,
            root: root.clone(),
        })
    })
}
