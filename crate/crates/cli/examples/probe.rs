// Scratch diagnostics; not part of the deliverable.
use opsin_evo_core::evolution::{run_evolution, EnvPipeline, EvolutionConfig, Optimizer};
use opsin_evo_core::perception::{featurize, forward, miou};
use opsin_evo_core::scene::{synth_scene, Layout, SceneConfig, SpectrumTemplate};
use opsin_evo_core::spectral::{render, OpsinBank, OpsinKernel, SpectralGrid};

fn main() {
    let grid = SpectralGrid::default_visible();
    let scenes: Vec<_> = (0..4)
        .map(|i| {
            synth_scene(&SceneConfig {
                height: 32,
                width: 32,
                grid: grid.clone(),
                classes: vec![
                    SpectrumTemplate::new("canopy", vec![], 0.2, 0.05).unwrap(),
                    SpectrumTemplate::new("f540", vec![(540.0, 15.0, 1.0)], 0.1, 0.05).unwrap(),
                    SpectrumTemplate::new("f580", vec![(580.0, 15.0, 1.0)], 0.1, 0.05).unwrap(),
                ],
                layout: Layout::Blobs { blob_count: 10 },
                seed: 7 + i,
            })
            .unwrap()
        })
        .collect();
    let bank = OpsinBank::new(vec![
        OpsinKernel::new(540.0, 15.0, false, 1.0).unwrap(),
        OpsinKernel::new(580.0, 15.0, false, 1.0).unwrap(),
        OpsinKernel::new(425.0, 15.0, false, 1.0).unwrap(),
    ])
    .unwrap();
    // class means of channels on scene 0
    let map = render(&scenes[0], &bank).unwrap();
    let mut sums = vec![[0.0f64; 3]; 3];
    let mut counts = [0usize; 3];
    for y in 0..32 {
        for x in 0..32 {
            let c = map.label(x, y) as usize;
            counts[c] += 1;
            for ch in 0..3 {
                sums[c][ch] += map.value(x, y, ch);
            }
        }
    }
    for c in 0..3 {
        println!(
            "class {c}: count {:4} channel means {:.3} {:.3} {:.3}",
            counts[c],
            sums[c][0] / counts[c] as f64,
            sums[c][1] / counts[c] as f64,
            sums[c][2] / counts[c] as f64
        );
    }
    for (lr, epochs, cosine) in [(0.1, 200usize, false), (0.05, 1000, false), (0.2, 1000, false), (0.5, 2000, false)] {
        let config = EvolutionConfig {
            epochs,
            lr_opsin: 0.0,
            lr_head: lr,
            max_shift_nm: 0.5,
            optimizer: Optimizer::adam(),
            cosine_schedule: cosine,
            seed: 42,
        };
        let out = run_evolution(bank.clone(), &scenes, &EnvPipeline::none(), &config).unwrap();
        // confusion on scene 0
        let features = featurize(&render(&scenes[0], &out.bank).unwrap());
        let pred = forward(&out.head, &features).unwrap();
        let mut confusion = [[0usize; 3]; 3];
        for (p, l) in pred.labels().iter().zip(scenes[0].labels()) {
            confusion[*l as usize][*p as usize] += 1;
        }
        let m = miou(&pred, scenes[0].labels()).unwrap();
        println!(
            "lr_head {lr} epochs {epochs} cosine {cosine}: loss {:.4} miou {:.4} confusion {:?}",
            out.records.last().unwrap().loss,
            m,
            confusion
        );
    }
}
