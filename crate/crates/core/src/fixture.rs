//! A small deterministic blogging API used by the end-to-end tests.
//!
//! The API lives under `/api`; `POST /__reset` restores the seed data.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::model::{HttpRequest, HttpResponse, Method};
use crate::transport::{Transport, TransportError};

/// Path prefix of every API route.
pub const API_PREFIX: &str = "/api";
pub const RESET_PATH: &str = "/__reset";
/// Hand-written OpenAPI document for the fixture's public API.
pub const GROUND_TRUTH: &str = include_str!("../fixture-gt.yaml");

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: u64,
    pub name: String,
    pub role: String,
    pub bio: String,
    pub following: Vec<String>,
    pub followers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub id: u64,
    pub body: String,
    pub author: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub id: u64,
    pub title: String,
    pub body: String,
    pub author: String,
    pub tags: Vec<String>,
    pub comments: Vec<Comment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tag {
    pub id: u64,
    pub name: String,
    pub author: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureState {
    pub users: BTreeMap<String, User>,
    pub articles: BTreeMap<u64, Article>,
    pub tags: Vec<Tag>,
    /// Session token to user name.
    pub sessions: BTreeMap<String, String>,
}

impl FixtureState {
    pub fn seed() -> Self {
        let user = |id: u64, name: &str, follows: &str| User {
            id,
            name: name.to_string(),
            role: "user".to_string(),
            bio: format!("I am {name}"),
            following: vec![follows.to_string()],
            followers: vec![follows.to_string()],
        };
        let article = |id: u64, author: &str, commenter: &str, text: &str| Article {
            id,
            title: format!("Article {id}"),
            body: format!("Body of article {id}"),
            author: author.to_string(),
            tags: vec![format!("tag{id}")],
            comments: vec![Comment {
                id,
                body: text.to_string(),
                author: commenter.to_string(),
            }],
        };
        let tag = |id: u64| Tag {
            id,
            name: format!("tag{id}"),
            author: "user1".to_string(),
        };
        FixtureState {
            users: [user(1, "user1", "user2"), user(2, "user2", "user1")]
                .into_iter()
                .map(|u| (u.name.clone(), u))
                .collect(),
            articles: [
                article(1, "user1", "user2", "Nice post"),
                article(2, "user2", "user1", "Thanks"),
            ]
            .into_iter()
            .map(|a| (a.id, a))
            .collect(),
            tags: vec![tag(1), tag(2)],
            sessions: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Reset,
    Users,
    Login,
    User,
    UserInfo,
    UserFollow,
    Articles,
    Article,
    ArticleComments,
    Tags,
    Tag,
}

impl Route {
    fn methods(self) -> &'static [Method] {
        match self {
            Route::Reset | Route::Login => &[Method::Post],
            Route::UserFollow | Route::Articles => &[Method::Get, Method::Post],
            _ => &[Method::Get],
        }
    }
}

fn request_path(url: &str) -> &str {
    let after_scheme = match url.find("://") {
        Some(i) => {
            let rest = &url[i + 3..];
            rest.find('/').map_or("/", |j| &rest[j..])
        }
        None => url,
    };
    after_scheme.split(['?', '#']).next().unwrap_or("/")
}

fn error(status: u16, message: &str) -> HttpResponse {
    HttpResponse::json(status, &json!({ "error": message }))
}

#[derive(Debug, Clone)]
pub struct FixtureApp {
    state: FixtureState,
}

impl Default for FixtureApp {
    fn default() -> Self {
        Self::new()
    }
}

impl FixtureApp {
    pub fn new() -> Self {
        FixtureApp {
            state: FixtureState::seed(),
        }
    }

    pub fn state(&self) -> &FixtureState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = FixtureState::seed();
    }

    fn route<'p>(&self, path: &'p str) -> Option<(Route, Vec<&'p str>)> {
        if path == RESET_PATH {
            return Some((Route::Reset, vec![]));
        }
        let rest = path.strip_prefix(API_PREFIX)?;
        let segs: Vec<&str> = rest.split('/').filter(|s| !s.is_empty()).collect();
        let route = match segs.as_slice() {
            ["users"] => Route::Users,
            ["users", "login"] => Route::Login,
            ["users", _] => Route::User,
            ["users", _, "info"] => Route::UserInfo,
            ["users", _, "follow"] => Route::UserFollow,
            ["articles"] => Route::Articles,
            ["articles", _] => Route::Article,
            ["articles", _, "comments"] => Route::ArticleComments,
            ["tags"] => Route::Tags,
            ["tags", _] => Route::Tag,
            _ => return None,
        };
        Some((route, segs))
    }

    fn session_user(&self, req: &HttpRequest) -> Option<String> {
        let cookies = req.header("cookie")?;
        cookies.split(';').find_map(|part| {
            let (name, value) = part.trim().split_once('=')?;
            (name == "session")
                .then(|| self.state.sessions.get(value).cloned())
                .flatten()
        })
    }

    fn body_json(req: &HttpRequest) -> Option<Value> {
        serde_json::from_slice(req.body.as_deref()?).ok()
    }

    fn user_json(u: &User) -> Value {
        json!({"id": u.id, "name": u.name, "role": u.role})
    }

    fn article_json(a: &Article) -> Value {
        json!({"id": a.id, "title": a.title, "body": a.body, "author": a.author, "tagList": a.tags})
    }

    fn comment_json(c: &Comment) -> Value {
        json!({"id": c.id, "body": c.body, "author": c.author})
    }

    fn profile_json(&self, u: &User) -> Value {
        let articles: Vec<Value> = self
            .state
            .articles
            .values()
            .filter(|a| a.author == u.name)
            .map(|a| {
                let comments: Vec<Value> = a.comments.iter().map(Self::comment_json).collect();
                json!({"id": a.id, "title": a.title, "author": a.author, "comments": comments})
            })
            .collect();
        json!({
            "username": u.name,
            "bio": u.bio,
            "following": u.following,
            "articles": articles,
        })
    }

    fn follow_json(u: &User) -> Value {
        json!({"user": u.name, "followers": u.followers})
    }

    fn dispatch(&mut self, route: Route, segs: &[&str], req: &HttpRequest) -> HttpResponse {
        let method = req.method;
        match route {
            Route::Reset => {
                self.reset();
                HttpResponse::json(200, &json!({"reset": true}))
            }
            Route::Users => {
                let list: Vec<Value> = self.state.users.values().map(Self::user_json).collect();
                HttpResponse::json(200, &Value::Array(list))
            }
            Route::Login => {
                let name = Self::body_json(req).and_then(|b| {
                    b.get("username")
                        .or_else(|| b.pointer("/user/username"))
                        .and_then(Value::as_str)
                        .map(str::to_string)
                });
                match name {
                    Some(n) if self.state.users.contains_key(&n) => {
                        let token = format!("token-{n}");
                        self.state.sessions.insert(token.clone(), n.clone());
                        HttpResponse::json(200, &json!({"username": n}))
                            .with_header("Set-Cookie", format!("session={token}; Path=/; HttpOnly"))
                    }
                    Some(_) => error(401, "unknown user"),
                    None => error(422, "username required"),
                }
            }
            Route::User | Route::UserInfo | Route::UserFollow => {
                let Some(user) = self.state.users.get(segs[1]).cloned() else {
                    return error(404, "no such user");
                };
                match route {
                    Route::User => HttpResponse::json(200, &self.profile_json(&user)),
                    Route::UserInfo => HttpResponse::json(200, &Self::user_json(&user)),
                    _ if method == Method::Post => {
                        let follower = self
                            .session_user(req)
                            .unwrap_or_else(|| "anonymous".to_string());
                        let u = self.state.users.get_mut(segs[1]).expect("checked above");
                        if !u.followers.contains(&follower) {
                            u.followers.push(follower);
                        }
                        HttpResponse::json(200, &Self::follow_json(u))
                    }
                    _ => HttpResponse::json(200, &Self::follow_json(&user)),
                }
            }
            Route::Articles if method == Method::Post => {
                let Some(author) = self.session_user(req) else {
                    return error(401, "login required");
                };
                let body = Self::body_json(req).unwrap_or(Value::Null);
                let Some(title) = body.get("title").and_then(Value::as_str) else {
                    return error(422, "title required");
                };
                let id = self.state.articles.keys().max().copied().unwrap_or(0) + 1;
                let article = Article {
                    id,
                    title: title.to_string(),
                    body: body.get("body").and_then(Value::as_str).unwrap_or("").to_string(),
                    author: author.clone(),
                    tags: Vec::new(),
                    comments: vec![Comment {
                        id: 100 + id,
                        body: "First!".to_string(),
                        author,
                    }],
                };
                let out = Self::article_json(&article);
                self.state.articles.insert(id, article);
                HttpResponse::json(201, &out)
            }
            Route::Articles => {
                let list: Vec<Value> = self.state.articles.values().map(Self::article_json).collect();
                HttpResponse::json(200, &Value::Array(list))
            }
            Route::Article | Route::ArticleComments => {
                let Some(article) = segs[1].parse::<u64>().ok().and_then(|id| self.state.articles.get(&id))
                else {
                    return error(404, "no such article");
                };
                if route == Route::Article {
                    HttpResponse::json(200, &Self::article_json(article))
                } else {
                    let list: Vec<Value> = article.comments.iter().map(Self::comment_json).collect();
                    HttpResponse::json(200, &Value::Array(list))
                }
            }
            Route::Tags => {
                let list: Vec<Value> = self
                    .state
                    .tags
                    .iter()
                    .map(|t| json!({"id": t.id, "name": t.name, "author": t.author}))
                    .collect();
                HttpResponse::json(200, &Value::Array(list))
            }
            Route::Tag => {
                let found = segs[1]
                    .parse::<u64>()
                    .ok()
                    .and_then(|id| self.state.tags.iter().find(|t| t.id == id));
                match found {
                    Some(t) => HttpResponse::json(200, &json!({"id": t.id, "name": t.name, "author": t.author})),
                    None => error(404, "no such tag"),
                }
            }
        }
    }

    pub fn handle(&mut self, req: &HttpRequest) -> HttpResponse {
        let path = request_path(&req.url);
        let Some((route, segs)) = self.route(path) else {
            return error(404, "not found");
        };
        let allowed = route.methods();
        let allow_header = || {
            let mut names: Vec<&str> = allowed.iter().map(|m| m.as_str()).collect();
            if allowed.contains(&Method::Get) {
                names.push("HEAD");
            }
            names.push("OPTIONS");
            names.join(", ")
        };
        match req.method {
            // Answered everywhere, documented nowhere.
            Method::Options => HttpResponse::new(200).with_header("Allow", allow_header()),
            Method::Head if allowed.contains(&Method::Get) => {
                let get = HttpRequest {
                    method: Method::Get,
                    ..req.clone()
                };
                let mut resp = self.dispatch(route, &segs, &get);
                resp.body = None;
                resp
            }
            m if allowed.contains(&m) => self.dispatch(route, &segs, req),
            _ => error(405, "method not allowed").with_header("Allow", allow_header()),
        }
    }
}

impl Transport for FixtureApp {
    fn send(&mut self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        Ok(self.handle(req))
    }
}
