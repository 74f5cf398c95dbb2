use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nlhelm_core::{build_disk_mesh_level, make_space, FeSpace, Mesh, Result};

/// Applies `f` to every item on up to `threads` workers; results keep the
/// item order.
pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = threads.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every item is processed")).collect()
}

/// Meshes and spaces shared between the runs of a sweep.
#[derive(Default)]
pub struct SpaceCache {
    meshes: Mutex<HashMap<(usize, usize), Arc<Mesh>>>,
    spaces: Mutex<HashMap<(usize, usize, usize), Arc<FeSpace>>>,
}

impl SpaceCache {
    pub fn mesh(&self, level: usize, q: usize) -> Result<Arc<Mesh>> {
        if let Some(m) = self.meshes.lock().unwrap().get(&(level, q)) {
            return Ok(m.clone());
        }
        let m = build_disk_mesh_level(level, q)?;
        Ok(self.meshes.lock().unwrap().entry((level, q)).or_insert(m).clone())
    }

    pub fn space(&self, level: usize, q: usize, p: usize) -> Result<Arc<FeSpace>> {
        if let Some(s) = self.spaces.lock().unwrap().get(&(level, q, p)) {
            return Ok(s.clone());
        }
        let s = make_space(self.mesh(level, q)?, p)?;
        Ok(self.spaces.lock().unwrap().entry((level, q, p)).or_insert(s).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        let items: Vec<usize> = (0..37).collect();
        for threads in [1, 3, 64] {
            assert_eq!(parallel_map(&items, threads, |i| i * i), items.iter().map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(parallel_map(&[] as &[u8], 4, |x| *x).is_empty());
    }

    #[test]
    fn spaces_are_shared() {
        let c = SpaceCache::default();
        let a = c.space(1, 2, 2).unwrap();
        let b = c.space(1, 2, 2).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert!(Arc::ptr_eq(a.mesh(), &c.mesh(1, 2).unwrap()));
    }
}
